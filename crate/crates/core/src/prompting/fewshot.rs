use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::parse::parse_response;
use super::PromptMode;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FewShotExample {
    pub scenario: String,
    pub observation: String,
    pub response: String,
}

/// Example sets keyed by prompting mode, each ordered by scenario name.
///
/// On disk: `<root>/<mode>/<scenario>.txt`, each file an observation and a
/// response separated by a line holding only `---`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FewShotStore {
    sets: BTreeMap<PromptMode, BTreeMap<String, FewShotExample>>,
}

const BUILTIN: &[(PromptMode, &str, &str)] = &[
    (PromptMode::Standard, "merge_proceed", include_str!("../../data/fewshot/standard/merge_proceed.txt")),
    (PromptMode::Standard, "merge_yield", include_str!("../../data/fewshot/standard/merge_yield.txt")),
    (PromptMode::Standard, "safe_overtake", include_str!("../../data/fewshot/standard/safe_overtake.txt")),
    (PromptMode::Standard, "unsafe_overtake", include_str!("../../data/fewshot/standard/unsafe_overtake.txt")),
    (
        PromptMode::ChainOfThought,
        "merge_proceed",
        include_str!("../../data/fewshot/chain_of_thought/merge_proceed.txt"),
    ),
    (
        PromptMode::ChainOfThought,
        "merge_yield",
        include_str!("../../data/fewshot/chain_of_thought/merge_yield.txt"),
    ),
    (
        PromptMode::ChainOfThought,
        "safe_overtake",
        include_str!("../../data/fewshot/chain_of_thought/safe_overtake.txt"),
    ),
    (
        PromptMode::ChainOfThought,
        "unsafe_overtake",
        include_str!("../../data/fewshot/chain_of_thought/unsafe_overtake.txt"),
    ),
];

fn split_example(text: &str) -> Option<(String, String)> {
    let mut observation = Vec::new();
    let mut response = Vec::new();
    let mut seen = false;
    for line in text.lines() {
        if !seen && line.trim_end() == "---" {
            seen = true;
        } else if seen {
            response.push(line);
        } else {
            observation.push(line);
        }
    }
    if !seen {
        return None;
    }
    let observation = observation.join("\n").trim().to_string();
    let response = response.join("\n").trim().to_string();
    (!observation.is_empty() && !response.is_empty()).then_some((observation, response))
}

impl FewShotStore {
    /// The exemplars shipped with the crate.
    pub fn builtin() -> Self {
        let mut store = Self::default();
        for (mode, scenario, text) in BUILTIN {
            store
                .insert_text(*mode, scenario, text, Path::new(scenario))
                .expect("shipped few-shot examples are well formed");
        }
        store
    }

    /// Loads every `<mode>/<scenario>.txt` below `root`. Unknown mode
    /// directories are ignored.
    pub fn load_dir(root: &Path) -> Result<Self> {
        let mut store = Self::default();
        for mode in PromptMode::ALL {
            let dir = root.join(mode.as_str());
            if !dir.is_dir() {
                continue;
            }
            let mut paths: Vec<_> = fs::read_dir(&dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "txt"))
                .collect();
            paths.sort();
            for path in paths {
                let scenario = path
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_string();
                let text = fs::read_to_string(&path)?;
                store.insert_text(mode, &scenario, &text, &path)?;
            }
        }
        Ok(store)
    }

    fn insert_text(&mut self, mode: PromptMode, scenario: &str, text: &str, path: &Path) -> Result<()> {
        let bad = |reason: &str| Error::FewShot {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let (observation, response) =
            split_example(text).ok_or_else(|| bad("expected observation, `---` line, response"))?;
        let parsed = parse_response(&response).map_err(|e| bad(&e.to_string()))?;
        match (mode, parsed.thoughts.is_some()) {
            (PromptMode::ChainOfThought, false) => return Err(bad("chain-of-thought response lacks reasoning")),
            (PromptMode::Standard, true) => return Err(bad("standard response must be a bare action line")),
            _ => {}
        }
        self.sets.entry(mode).or_default().insert(
            scenario.to_string(),
            FewShotExample {
                scenario: scenario.to_string(),
                observation,
                response,
            },
        );
        Ok(())
    }

    pub fn examples(&self, mode: PromptMode) -> Option<impl Iterator<Item = &FewShotExample>> {
        self.sets.get(&mode).filter(|s| !s.is_empty()).map(|s| s.values())
    }

    pub fn len(&self, mode: PromptMode) -> usize {
        self.sets.get(&mode).map_or(0, |s| s.len())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::MetaAction;

    #[test]
    fn builtin_sets_have_four_examples_per_mode() {
        let store = FewShotStore::builtin();
        for mode in PromptMode::ALL {
            let names: Vec<_> = store.examples(mode).unwrap().map(|e| e.scenario.as_str()).collect();
            assert_eq!(names, ["merge_proceed", "merge_yield", "safe_overtake", "unsafe_overtake"]);
        }
    }

    #[test]
    fn builtin_cot_examples_teach_the_described_behaviours() {
        let store = FewShotStore::builtin();
        let action = |name: &str| {
            let e = store
                .examples(PromptMode::ChainOfThought)
                .unwrap()
                .find(|e| e.scenario == name)
                .unwrap();
            parse_response(&e.response).unwrap().action
        };
        assert_eq!(action("safe_overtake"), MetaAction::LaneLeft);
        assert_eq!(action("unsafe_overtake"), MetaAction::Slower);
        assert_eq!(action("merge_yield"), MetaAction::Slower);
    }

    #[test]
    fn load_dir_round_trips_and_validates() {
        let dir = tempfile::tempdir().unwrap();
        let std_dir = dir.path().join("standard");
        fs::create_dir_all(&std_dir).unwrap();
        fs::write(std_dir.join("a.txt"), "obs line\n---\nAction: 3\n").unwrap();
        let store = FewShotStore::load_dir(dir.path()).unwrap();
        assert_eq!(store.len(PromptMode::Standard), 1);
        assert!(store.examples(PromptMode::ChainOfThought).is_none());

        fs::write(std_dir.join("b.txt"), "obs\n---\nBecause.\nAction: 3\n").unwrap();
        assert!(matches!(FewShotStore::load_dir(dir.path()), Err(Error::FewShot { .. })));

        fs::write(std_dir.join("b.txt"), "no separator").unwrap();
        assert!(FewShotStore::load_dir(dir.path()).is_err());
    }
}
