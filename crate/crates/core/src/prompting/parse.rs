use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use super::{Decision, DecisionSource};
use crate::actions::MetaAction;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("response has no `Action:` line")]
    MissingAction { raw: String },
    #[error("`Action:` line does not name exactly one action: `{token}`")]
    UnrecognizedAction { raw: String, token: String },
}

impl ParseError {
    pub fn raw(&self) -> &str {
        match self {
            ParseError::MissingAction { raw } | ParseError::UnrecognizedAction { raw, .. } => raw,
        }
    }
}

fn action_marker() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\baction\s*:").expect("valid regex"))
}

fn action_token(rest: &str) -> Option<MetaAction> {
    let cleaned = rest
        .trim()
        .trim_matches(|c: char| matches!(c, '*' | '`' | '"' | '\'' | '.' | ' '))
        .replace([' ', '-'], "_");
    if cleaned.is_empty() {
        return None;
    }
    cleaned.parse().ok()
}

/// Finds the last `Action: <code-or-name>` marker. Everything before the
/// marker becomes the thoughts (trimmed, absent when empty); anything after
/// the action line is ignored.
pub fn parse_response(text: &str) -> Result<Decision, ParseError> {
    let Some(marker) = action_marker().find_iter(text).last() else {
        return Err(ParseError::MissingAction { raw: text.to_string() });
    };
    let rest = &text[marker.end()..];
    let line = rest.lines().next().unwrap_or("");
    let action = action_token(line).ok_or_else(|| ParseError::UnrecognizedAction {
        raw: text.to_string(),
        token: line.trim().to_string(),
    })?;
    let before = text[..marker.start()].trim();
    Ok(Decision {
        thoughts: (!before.is_empty()).then(|| before.to_string()),
        action,
        raw_response: text.to_string(),
        source: DecisionSource::Llm,
        latency: 0.0,
    })
}

/// Canonical response layout taught by the few-shot exemplars.
pub fn format_response(thoughts: Option<&str>, action: MetaAction) -> String {
    match thoughts {
        Some(t) if !t.trim().is_empty() => format!("{}\nAction: {}", t.trim_end(), action.code()),
        _ => format!("Action: {}", action.code()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_action_line() {
        let d = parse_response("Action: 1").unwrap();
        assert_eq!(d.action, MetaAction::Idle);
        assert_eq!(d.thoughts, None);
    }

    #[test]
    fn reasoning_then_named_action() {
        let d = parse_response("The left lane is clear... Action: LANE_LEFT").unwrap();
        assert_eq!(d.action, MetaAction::LaneLeft);
        assert_eq!(d.thoughts.as_deref(), Some("The left lane is clear..."));

        let d = parse_response("Lead is slow.\nLeft lane is busy.\n\nAction: slower\n").unwrap();
        assert_eq!(d.action, MetaAction::Slower);
        assert_eq!(d.thoughts.as_deref(), Some("Lead is slow.\nLeft lane is busy."));
    }

    #[test]
    fn no_action_line_is_an_error() {
        let e = parse_response("I would change lanes").unwrap_err();
        assert!(matches!(e, ParseError::MissingAction { .. }));
        assert_eq!(e.raw(), "I would change lanes");
    }

    #[test]
    fn last_marker_wins() {
        let d = parse_response("Earlier I said Action: 0 but\nAction: 4").unwrap();
        assert_eq!(d.action, MetaAction::Slower);
        assert_eq!(d.thoughts.as_deref(), Some("Earlier I said Action: 0 but"));
    }

    #[test]
    fn markdown_decoration_is_tolerated() {
        assert_eq!(parse_response("**Action:** `3`").unwrap().action, MetaAction::Faster);
        assert_eq!(parse_response("Action: Lane Right.").unwrap().action, MetaAction::LaneRight);
    }

    #[test]
    fn ambiguous_tokens_are_rejected() {
        for bad in ["Action: 0 or 2", "Action: 7", "Action:", "Action: LEFT"] {
            assert!(
                matches!(parse_response(bad), Err(ParseError::UnrecognizedAction { .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn format_then_parse() {
        for a in MetaAction::ALL {
            let text = format_response(Some("reason one\nreason two"), a);
            let d = parse_response(&text).unwrap();
            assert_eq!(d.action, a);
            assert_eq!(d.thoughts.as_deref(), Some("reason one\nreason two"));
            assert_eq!(parse_response(&format_response(None, a)).unwrap().thoughts, None);
        }
    }
}
