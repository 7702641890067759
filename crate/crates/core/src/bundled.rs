//! Example content shipped with the engine.

use crate::script::{parse_script, DramaScript};

pub const EXAMPLE_SCRIPT_NAME: &str = "the-last-ferry";
pub const EXAMPLE_SCRIPT: &str = include_str!("../data/scripts/the-last-ferry.json");

pub fn example_script() -> DramaScript {
    parse_script(EXAMPLE_SCRIPT).expect("bundled script is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::SceneMode;

    #[test]
    fn example_has_three_scenes_and_nine_characters() {
        let script = example_script();
        assert_eq!(script.scenes.len(), 3);
        assert_eq!(script.roster.len(), 9);
        assert_eq!(script.roster.iter().filter(|c| c.is_player).count(), 1);
        assert_eq!(script.scenes[0].mode, SceneMode::Narrative);
        assert!(script.scenes[2].plot_chain.iter().all(|p| p.owner.is_some()));
    }
}
