#![allow(dead_code)]

pub mod shapes;

use std::path::PathBuf;

use guideqa::classify::{self, IntentModel};
use guideqa::gen::{self, QuestionTemplate, TrainingExample};
use guideqa::KnowledgeBase;

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub struct Bundle {
    pub kb: KnowledgeBase,
    pub templates: Vec<QuestionTemplate>,
    pub corpus: Vec<TrainingExample>,
    pub model: IntentModel,
}

pub fn bundle() -> Bundle {
    let kb = guideqa::load_guide(data("guide.json")).expect("bundled guide loads");
    let templates = gen::parse_templates(data("templates.json")).expect("bundled templates parse");
    let corpus = gen::generate_dataset(&templates, &kb)
        .expect("corpus")
        .examples;
    let model = classify::train(&corpus, classify::DEFAULT_ALPHA).expect("model trains");
    Bundle {
        kb,
        templates,
        corpus,
        model,
    }
}

pub fn missed_five() -> Vec<TrainingExample> {
    gen::read_corpus(fixture("missed_5.jsonl")).expect("missed fixture")
}
