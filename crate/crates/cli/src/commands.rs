use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use satbot_core::assets::{augment_persona, demo_annotations, persona_language_model, DEFAULT_NB_SMOOTHING};
use satbot_core::corpus::{
    load_annotations, load_dataset, partition_all, EmotionContext, LoadOptions, PartitionConfig, Persona,
};
use satbot_core::emotion::{self, EmotionClassifier, KeywordClassifier, PrecomputedEmotions};
use satbot_core::empathy::{self, NaiveBayesEmpathy, PrecomputedEmpathy};
use satbot_core::lm::{TrigramConfig, TrigramModel};
use satbot_core::pool_file::{read_pool_file, rows_from_pool, write_pool_file};
use satbot_core::scoring::{fluency_raw, EmpathyScorer, FluencyConfig};
use satbot_core::text::Normalizer;

use crate::{AugmentArgs, Cli, Command, EvalEmotionArgs, EvalEmpathyArgs, PrecomputeArgs};

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Augment(a) => augment(a),
        Command::Precompute(a) => precompute(a),
        Command::EvalEmotion(a) => eval_emotion(a),
        Command::EvalEmpathy(a) => eval_empathy(a),
        Command::Bench(a) => crate::bench::run(a, cli.seed),
        Command::Serve(a) => crate::serve::run(a, cli.seed),
    }
}

pub(crate) fn parse_personas(names: &[String]) -> Result<Vec<Persona>> {
    if names.is_empty() {
        return Ok(Persona::ALL.to_vec());
    }
    names
        .iter()
        .map(|n| n.parse::<Persona>().map_err(anyhow::Error::msg))
        .collect()
}

/// File name for one persona's pool; pool ids are reduced to `[A-Za-z0-9_-]`.
pub fn pool_file_name(persona: Persona, pool_id: &str) -> String {
    let safe: String = pool_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    format!("{persona}__{safe}.csv")
}

fn load_opts(separator: &str) -> LoadOptions {
    LoadOptions {
        expression_separator: separator.to_string(),
    }
}

fn augment(a: AugmentArgs) -> Result<()> {
    let personas = parse_personas(&a.persona)?;
    let dataset = load_dataset(&a.dataset, &load_opts(&a.separator))
        .with_context(|| format!("loading {}", a.dataset.display()))?;
    let cfg = PartitionConfig {
        seniors_in_older_personas: a.seniors_in_older_personas,
    };
    if let Some(out) = &a.out {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    }
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "persona,pools,rewritings,augmented")?;
    for persona in personas {
        let rewritings: usize = partition_all(&dataset, persona, &cfg)
            .iter()
            .map(|p| p.utterances.len())
            .sum();
        let pools = augment_persona(&dataset, persona, &cfg)?;
        let augmented: usize = pools.iter().map(|p| p.len()).sum();
        if let Some(out) = &a.out {
            let mut names = HashMap::new();
            for pool in &pools {
                let name = pool_file_name(persona, pool.pool_id.as_str());
                if let Some(other) = names.insert(name.clone(), pool.pool_id.clone()) {
                    bail!("pool ids {other} and {} map to the same file {name}", pool.pool_id);
                }
                write_pool_file(&out.join(&name), &rows_from_pool(pool))?;
            }
        }
        writeln!(stdout, "{persona},{},{rewritings},{augmented}", pools.len())?;
    }
    Ok(())
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

fn precompute(a: PrecomputeArgs) -> Result<()> {
    let fluency = FluencyConfig {
        repeat_penalty: a.repeat_penalty,
        max_fluency: a.max_fluency,
        ..FluencyConfig::default()
    };
    fluency.validate()?;
    let scorer: Box<dyn EmpathyScorer> = match (&a.empathy_labels, &a.annotations) {
        (Some(path), _) => Box::new(PrecomputedEmpathy::from_file(path)?),
        (None, Some(path)) => Box::new(NaiveBayesEmpathy::train(
            &load_annotations(path)?,
            DEFAULT_NB_SMOOTHING,
            Normalizer::default(),
        )?),
        (None, None) => Box::new(NaiveBayesEmpathy::train(
            &demo_annotations(),
            DEFAULT_NB_SMOOTHING,
            Normalizer::default(),
        )?),
    };
    let dataset = load_dataset(&a.dataset, &load_opts(&a.separator))
        .with_context(|| format!("loading {}", a.dataset.display()))?;
    let partition = PartitionConfig {
        seniors_in_older_personas: a.seniors_in_older_personas,
    };
    let out = a.out.clone().unwrap_or_else(|| a.pools.clone());
    std::fs::create_dir_all(&out)?;

    let mut models: BTreeMap<Persona, TrigramModel> = BTreeMap::new();
    let mut max_raw = f64::NEG_INFINITY;
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "file,utterances")?;
    for path in csv_files(&a.pools)? {
        let mut rows = read_pool_file(&path)?;
        for row in &mut rows {
            let lm = match models.entry(row.persona) {
                Entry::Occupied(e) => e.into_mut(),
                Entry::Vacant(e) => e.insert(persona_language_model(
                    &dataset,
                    row.persona,
                    &partition,
                    TrigramConfig::default(),
                )?),
            };
            let label = scorer.classify(&row.text)?;
            let raw = fluency_raw(&row.text, lm, &fluency)
                .with_context(|| format!("fluency for {:?} in {}", row.text, path.display()))?;
            max_raw = max_raw.max(raw);
            row.empathy_label = Some(label);
            row.fluency_raw = Some(raw);
        }
        let name = path.file_name().expect("listed file has a name");
        write_pool_file(&out.join(name), &rows)?;
        writeln!(stdout, "{},{}", name.to_string_lossy(), rows.len())?;
    }
    if max_raw.is_finite() && max_raw > a.max_fluency {
        eprintln!(
            "note: largest raw fluency {max_raw:.4} exceeds --max-fluency {}; those utterances normalise to 1",
            a.max_fluency
        );
    }
    Ok(())
}

fn eval_emotion(a: EvalEmotionArgs) -> Result<()> {
    let test = emotion::load_labelled(&a.test)?;
    ensure!(!test.is_empty(), "test set {} is empty", a.test.display());
    let fallback: EmotionContext = a.fallback.parse().map_err(anyhow::Error::msg)?;
    let classifier: Box<dyn EmotionClassifier> = match (&a.predictions, &a.lexicon) {
        (Some(p), _) => Box::new(PrecomputedEmotions::new(&emotion::load_labelled(p)?)),
        (None, Some(lex)) => Box::new(KeywordClassifier::from_file(lex, Normalizer::default(), fallback)?),
        (None, None) => Box::new(KeywordClassifier::default().with_fallback(fallback)),
    };
    let report = emotion::evaluate(classifier.as_ref(), &test)?;
    print!("{}", report.to_csv());
    Ok(())
}

fn eval_empathy(a: EvalEmpathyArgs) -> Result<()> {
    let test = load_annotations(&a.test)?;
    ensure!(!test.is_empty(), "test set {} is empty", a.test.display());
    let scorer: Box<dyn EmpathyScorer> = match (&a.predictions, &a.train) {
        (Some(p), _) => Box::new(PrecomputedEmpathy::from_file(p)?),
        (None, Some(t)) => Box::new(NaiveBayesEmpathy::train(&load_annotations(t)?, a.smoothing, Normalizer::default())?),
        (None, None) => Box::new(NaiveBayesEmpathy::train(&demo_annotations(), a.smoothing, Normalizer::default())?),
    };
    let report = empathy::evaluate(scorer.as_ref(), &test)?;
    print!("{}", report.to_csv());
    Ok(())
}

pub(crate) fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("creating {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pool_file_names_are_filesystem_safe() {
        assert_eq!(pool_file_name(Persona::Kai, "ask_event"), "kai__ask_event.csv");
        assert_eq!(pool_file_name(Persona::Olivia, "a/b c"), "olivia__a_b_c.csv");
    }
}
