//! `###`-headed section extraction for generation responses.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("response has no `### {tag}` section")]
pub struct MissingSection {
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedBlock {
    pub text: String,
    /// More than one section carried the tag; the first was returned.
    pub ambiguous: bool,
}

fn normalize(response: &str) -> String {
    response
        .replace("\r\n", "\n")
        .replace('\r', "\n")
        .lines()
        .map(str::trim_end)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Header title for lines such as `### Complete Story` or `## **Comment:**`.
fn header_title(line: &str) -> Option<&str> {
    let trimmed = line.trim_start();
    let hashes = trimmed.chars().take_while(|c| *c == '#').count();
    if !(2..=4).contains(&hashes) {
        return None;
    }
    let rest = &trimmed[hashes..];
    if !rest.starts_with(' ') {
        return None;
    }
    Some(rest.trim().trim_matches('*').trim_end_matches(':').trim())
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn title_matches(title: &str, tag: &str) -> bool {
    let (title, tag) = (words(title), words(tag));
    !tag.is_empty() && title.len() >= tag.len() && title[..tag.len()] == tag[..]
}

/// Every headed section as (title, body), in order. Text before the first
/// header is dropped.
pub fn sections(response: &str) -> Vec<(String, String)> {
    let text = normalize(response);
    let mut out: Vec<(String, Vec<&str>)> = Vec::new();
    for line in text.lines() {
        match header_title(line) {
            Some(title) => out.push((title.to_string(), Vec::new())),
            None => {
                if let Some((_, body)) = out.last_mut() {
                    body.push(line);
                }
            }
        }
    }
    out.into_iter()
        .map(|(title, body)| (title, body.join("\n").trim().to_string()))
        .collect()
}

/// Content of the section whose header starts with `tag` (case and
/// punctuation insensitive), trimmed.
pub fn extract_tagged_block(response: &str, tag: &str) -> Result<TaggedBlock, MissingSection> {
    let mut matching = sections(response)
        .into_iter()
        .filter(|(title, _)| title_matches(title, tag));
    let (_, text) = matching.next().ok_or_else(|| MissingSection {
        tag: tag.to_string(),
    })?;
    Ok(TaggedBlock {
        text,
        ambiguous: matching.next().is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extracts_named_section() {
        let r = "### Plot Outline\nX\n### Complete Story\nY";
        assert_eq!(extract_tagged_block(r, "Complete Story").unwrap().text, "Y");
        assert_eq!(extract_tagged_block(r, "Plot Outline").unwrap().text, "X");
    }

    #[test]
    fn missing_section() {
        let r = "### Plot Outline\nX\n### Complete Story\nY";
        assert_eq!(
            extract_tagged_block(r, "Critique"),
            Err(MissingSection {
                tag: "Critique".into()
            })
        );
    }

    #[test]
    fn windows_line_endings_and_trailing_spaces() {
        let unix = "### Plot Outline\nA storm.\nThe ferry waits.\n### Complete Story\nOnce.\nTwice.\n";
        let windows =
            "### Plot Outline  \r\nA storm.   \r\nThe ferry waits.\t\r\n### Complete Story \r\nOnce. \r\nTwice.  \r\n";
        for tag in ["Plot Outline", "Complete Story"] {
            assert_eq!(
                extract_tagged_block(unix, tag).unwrap(),
                extract_tagged_block(windows, tag).unwrap()
            );
        }
    }

    #[test]
    fn header_with_parenthetical_matches_prefix() {
        let r = "### Technique Explanation (briefly explain how)\nZ";
        assert_eq!(extract_tagged_block(r, "Technique Explanation").unwrap().text, "Z");
    }

    #[test]
    fn duplicate_sections_flag_ambiguity() {
        let r = "### Comment\nfirst\n### Comment\nsecond";
        let block = extract_tagged_block(r, "comment").unwrap();
        assert_eq!(block.text, "first");
        assert!(block.ambiguous);
    }

    #[test]
    fn bold_and_colon_headers() {
        let r = "## **Refined Story:**\nbody";
        assert_eq!(extract_tagged_block(r, "Refined Story").unwrap().text, "body");
    }
}
