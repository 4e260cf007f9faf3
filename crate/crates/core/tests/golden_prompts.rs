//! Golden tests pinning the prompt template bytes.

use neurolabel_core::prompts::{CONTRASTIVE_PROMPT, POSITIVE_PROMPT};

#[test]
fn positive_template_matches_golden_bytes() {
    let golden = include_str!("golden/positive_prompt.txt");
    assert_eq!(POSITIVE_PROMPT.as_bytes(), golden.as_bytes());
}

#[test]
fn contrastive_template_matches_golden_bytes() {
    let golden = include_str!("golden/contrastive_prompt.txt");
    assert_eq!(CONTRASTIVE_PROMPT.as_bytes(), golden.as_bytes());
}
