//! Subcommand implementations.
//!
//! Each command is a pure function of the configuration and the input
//! files: identical inputs produce byte-identical output files. Commands
//! return human-readable summary lines; files land in the output
//! directory via atomic writes.

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{
    atomic_write, atomic_write_via_path, coefficient_svg, kde_svg, write_summary,
};
use crate::pipeline::{
    build_regression_inputs, design_columns, fit_baseline, fit_ladder, subperiod_chow,
    zinb_robustness, RegressionInputs, LADDER,
};
use leadflow_core::corpus::{
    assemble_corpus, filter_corpus, parse_papers, parse_registry, Corpus, IngestMode,
    IngestOptions,
};
use leadflow_core::econometrics::{kde, write_fit_report, write_test_results, EconError};
use leadflow_core::econometrics::{correlation_matrix, descriptive_stats, vif};
use leadflow_core::econometrics::{write_correlations, write_descriptive_stats, write_vif};
use leadflow_core::leadership::{
    aggregate_by_province, build_network, disparity_distribution, leadership_mass, rank_by_mass,
    rank_dyads, write_edge_list, write_mass_ranking, CountingScheme,
};
use leadflow_core::proximity::write_design_matrix;
use leadflow_core::synth::gen_corpus;
use leadflow_core::topicmodel::{
    fit_lda, institution_vectors, perplexity, write_doc_topic, write_topic_word,
};
use leadflow_core::corpus::{write_papers, write_registry};
use nalgebra::DMatrix;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

/// Summary lines a command hands back for printing.
pub struct CommandOutcome {
    pub lines: Vec<String>,
}

fn line(lines: &mut Vec<String>, text: impl Into<String>) {
    lines.push(text.into());
}

// ---------------------------------------------------------------------------
// Input loading
// ---------------------------------------------------------------------------

/// Ingestion tallies for reporting.
#[derive(Debug, Default)]
pub struct LoadStats {
    pub rejected_lines: usize,
    pub dropped_papers: usize,
}

fn open_papers(config: &RunConfig) -> Result<BufReader<File>, CliError> {
    let path = &config.inputs.papers;
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::data(format!("cannot open papers file {}: {e}", path.display())))
}

fn load_registry(config: &RunConfig) -> Result<Vec<leadflow_core::corpus::InstitutionRecord>, CliError> {
    let path = &config.inputs.registry;
    let file = File::open(path)
        .map_err(|e| CliError::data(format!("cannot open registry file {}: {e}", path.display())))?;
    Ok(parse_registry(file)?)
}

/// Parses and assembles the corpus under the configured ingestion mode.
pub fn load_corpus(config: &RunConfig) -> Result<(Corpus, LoadStats), CliError> {
    let options = IngestOptions {
        mode: config.run.ingest_mode(),
        ..IngestOptions::default()
    };
    let parsed = parse_papers(open_papers(config)?, &options)?;
    let registry = load_registry(config)?;
    let assembled = assemble_corpus(parsed.records, registry, options.mode)?;
    Ok((
        assembled.corpus,
        LoadStats {
            rejected_lines: parsed.rejected.len(),
            dropped_papers: assembled.dropped.len(),
        },
    ))
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

/// Parses everything leniently to collect all problems, then applies the
/// configured mode: strict runs fail (exit 1) listing each problem as a
/// JSON line; lenient runs report tallies and succeed.
pub fn cmd_validate(config: &RunConfig) -> Result<CommandOutcome, CliError> {
    let options = IngestOptions {
        mode: IngestMode::Lenient,
        ..IngestOptions::default()
    };
    let parsed = parse_papers(open_papers(config)?, &options)?;
    // Registry parsing is strict by design; a broken registry is always fatal.
    let registry = load_registry(config)?;
    let assembled = assemble_corpus(parsed.records, registry, IngestMode::Lenient)?;

    let mut problems = Vec::new();
    for reject in &parsed.rejected {
        problems.push(serde_json::json!({
            "kind": "rejected_line",
            "line": reject.line,
            "message": reject.error.to_string(),
        }));
    }
    for (paper_id, error) in &assembled.dropped {
        problems.push(serde_json::json!({
            "kind": "dropped_paper",
            "paper_id": paper_id.as_str(),
            "message": error.to_string(),
        }));
    }

    let corpus = &assembled.corpus;
    let mut lines = Vec::new();
    line(&mut lines, format!("papers: {}", corpus.paper_count()));
    line(
        &mut lines,
        format!("institutions: {}", corpus.registry.len()),
    );
    let years: Vec<i32> = corpus.papers().map(|p| p.year).collect();
    if let (Some(min), Some(max)) = (years.iter().min(), years.iter().max()) {
        line(&mut lines, format!("years: {min}-{max}"));
    }
    let multi = corpus
        .papers()
        .filter(|p| p.institution_count() >= 2)
        .count();
    line(&mut lines, format!("multi_institution_papers: {multi}"));
    line(
        &mut lines,
        format!("rejected_lines: {}", parsed.rejected.len()),
    );
    line(
        &mut lines,
        format!("dropped_papers: {}", assembled.dropped.len()),
    );

    if config.run.strict && !problems.is_empty() {
        for p in &problems {
            println!("{p}");
        }
        return Err(CliError::data(format!(
            "{} invalid record(s) in strict mode",
            problems.len()
        )));
    }
    Ok(CommandOutcome { lines })
}

// ---------------------------------------------------------------------------
// network
// ---------------------------------------------------------------------------

pub fn cmd_network(config: &RunConfig, out_dir: &Path) -> Result<CommandOutcome, CliError> {
    let (corpus, stats) = load_corpus(config)?;
    let field = config.run.field.as_deref();
    let scheme: CountingScheme = config.run.counting.into();
    let period = config.periods.outcome;
    let network = build_network(&corpus, period, field, scheme);
    let mass = leadership_mass(&network);

    atomic_write(&out_dir.join("edge_list.csv"), |w| {
        Ok(write_edge_list(&network, w)?)
    })?;
    let ranking = rank_by_mass(&mass, config.run.top_k);
    atomic_write(&out_dir.join("mass_ranking.csv"), |w| {
        Ok(write_mass_ranking(&ranking, w)?)
    })?;
    let full_ranking = rank_by_mass(&mass, mass.len().max(1));
    atomic_write(&out_dir.join("masses.csv"), |w| {
        Ok(write_mass_ranking(&full_ranking, w)?)
    })?;
    let dyads = rank_dyads(&network, config.run.top_k);
    atomic_write(&out_dir.join("dyad_ranking.csv"), |w| {
        writeln!(w, "leader_id,participant_id,flow")?;
        for d in &dyads {
            writeln!(w, "{},{},{}", d.leader, d.participant, d.weight)?;
        }
        Ok(())
    })?;
    let provinces = aggregate_by_province(&network, &corpus.registry)?;
    atomic_write(&out_dir.join("province_flows.csv"), |w| {
        writeln!(w, "province_from,province_to,flow")?;
        for ((from, to), flow) in &provinces {
            writeln!(w, "{from},{to},{flow}")?;
        }
        Ok(())
    })?;

    let mut lines = Vec::new();
    line(&mut lines, format!("window: {period}"));
    line(
        &mut lines,
        format!("papers_in_window: {}", network.paper_count()),
    );
    line(
        &mut lines,
        format!("institutions_in_network: {}", network.institutions().len()),
    );
    line(&mut lines, format!("edges: {}", network.edge_count()));
    line(
        &mut lines,
        format!("total_flow: {}", network.total_weight()),
    );
    if let Some(top) = ranking.first() {
        line(
            &mut lines,
            format!("top_leader: {} ({})", top.institution_id, top.mass),
        );
    }
    if stats.rejected_lines + stats.dropped_papers > 0 {
        line(
            &mut lines,
            format!(
                "lenient_drops: {} rejected line(s), {} dropped paper(s)",
                stats.rejected_lines, stats.dropped_papers
            ),
        );
    }
    write_summary(
        &out_dir.join("summary.csv"),
        &lines
            .iter()
            .map(|l| split_summary_line(l))
            .collect::<Vec<_>>(),
    )?;
    Ok(CommandOutcome { lines })
}

fn split_summary_line(line: &str) -> (String, String) {
    match line.split_once(": ") {
        Some((k, v)) => (k.to_string(), v.to_string()),
        None => (line.to_string(), String::new()),
    }
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

pub fn cmd_fit(config: &RunConfig, out_dir: &Path) -> Result<CommandOutcome, CliError> {
    let (corpus, stats) = load_corpus(config)?;
    let inputs = build_regression_inputs(&corpus, config)?;
    let mut lines = Vec::new();

    atomic_write(&out_dir.join("design_matrix.csv"), |w| {
        Ok(write_design_matrix(&inputs.dataset, w)?)
    })?;

    // Descriptive table over the response and the non-constant regressors.
    let described = describe_columns(&inputs)?;
    atomic_write_via_path(&out_dir.join("descriptive_stats.csv"), |p| {
        Ok(write_descriptive_stats(p, &described.summaries)?)
    })?;
    atomic_write_via_path(&out_dir.join("correlations.csv"), |p| {
        Ok(write_correlations(p, &described.correlations)?)
    })?;
    atomic_write_via_path(&out_dir.join("vif.csv"), |p| {
        Ok(write_vif(p, &described.vif)?)
    })?;

    // Model ladder (or just the full specification).
    let fits = if config.models.ladder {
        fit_ladder(&inputs.dataset)?
    } else {
        vec![crate::pipeline::fit_censored(&inputs.dataset, LADDER[4])?]
    };
    let first_model = if config.models.ladder { 1 } else { 5 };
    for (offset, fit) in fits.iter().enumerate() {
        let name = format!("fit_tobit_m{}.csv", first_model + offset);
        atomic_write_via_path(&out_dir.join(name), |p| Ok(write_fit_report(p, fit)?))?;
    }
    let final_fit = fits.last().expect("at least one fit");
    atomic_write(&out_dir.join("coefficients.svg"), |w| {
        w.write_all(coefficient_svg(final_fit, "censored gravity model, full specification").as_bytes())?;
        Ok(())
    })?;
    if config.models.ols_baseline {
        let ols = fit_baseline(&inputs.dataset)?;
        atomic_write_via_path(&out_dir.join("fit_ols.csv"), |p| {
            Ok(write_fit_report(p, &ols)?)
        })?;
    }

    // Disparity of outgoing flows in the outcome window, with its density.
    let disparity = disparity_distribution(&inputs.outcome_network);
    atomic_write(&out_dir.join("disparity.csv"), |w| {
        writeln!(w, "institution_id,disparity")?;
        for (id, v) in &disparity.values {
            writeln!(w, "{id},{v}")?;
        }
        Ok(())
    })?;
    let disparity_values: Vec<f64> = disparity.values.iter().map(|&(_, v)| v).collect();
    match kde(&disparity_values) {
        Ok(curve) => {
            atomic_write_via_path(&out_dir.join("disparity_kde.csv"), |p| {
                Ok(leadflow_core::econometrics::write_kde_curve(p, &curve)?)
            })?;
            atomic_write(&out_dir.join("disparity_kde.svg"), |w| {
                w.write_all(kde_svg(&curve, "leadership disparity density").as_bytes())?;
                Ok(())
            })?;
        }
        Err(EconError::DegenerateSample { reason }) => {
            line(
                &mut lines,
                format!("disparity_kde: skipped ({reason})"),
            );
        }
        Err(e) => return Err(e.into()),
    }

    // Optional passes.
    let mut tests = Vec::new();
    if config.models.chow {
        let run = subperiod_chow(&corpus, config, &inputs)?;
        for (period, fit) in &run.sub_fits {
            let name = format!("fit_tobit_sub_{period}.csv");
            atomic_write_via_path(&out_dir.join(name), |p| Ok(write_fit_report(p, fit)?))?;
        }
        atomic_write_via_path(&out_dir.join("fit_tobit_pooled.csv"), |p| {
            Ok(write_fit_report(p, &run.pooled)?)
        })?;
        line(
            &mut lines,
            format!(
                "chow: statistic {:.4}, df {}, p {:.4}",
                run.test.statistic, run.test.df, run.test.p_value
            ),
        );
        tests.push(run.test);
    }
    if config.models.zinb {
        let run = zinb_robustness(&corpus, config, &inputs)?;
        atomic_write(&out_dir.join("design_matrix_full_counting.csv"), |w| {
            Ok(write_design_matrix(&run.dataset, w)?)
        })?;
        atomic_write_via_path(&out_dir.join("fit_nb2.csv"), |p| {
            Ok(write_fit_report(p, &run.nb)?)
        })?;
        atomic_write_via_path(&out_dir.join("fit_zinb.csv"), |p| {
            Ok(write_fit_report(p, &run.zinb)?)
        })?;
        line(
            &mut lines,
            format!(
                "vuong: statistic {:.4}, p {:.4}",
                run.vuong.statistic, run.vuong.p_value
            ),
        );
        tests.push(run.vuong);
    }
    if !tests.is_empty() {
        atomic_write_via_path(&out_dir.join("test_results.csv"), |p| {
            Ok(write_test_results(p, &tests)?)
        })?;
    }

    // Headline numbers.
    let n = inputs.dataset.n();
    let censored = inputs.dataset.y.iter().filter(|&&v| v == 0.0).count();
    line(&mut lines, format!("eligible_institutions: {}", inputs.eligible.len()));
    line(&mut lines, format!("dyads: {n}"));
    line(
        &mut lines,
        format!(
            "censored_share: {:.4}",
            censored as f64 / n.max(1) as f64
        ),
    );
    line(
        &mut lines,
        format!("lda_perplexity: {:.4}", inputs.perplexity),
    );
    line(
        &mut lines,
        format!(
            "final_model: loglik {:.4}, lr_chi2 {:.4}, pseudo_r2 {:.6}",
            final_fit.loglik, final_fit.lr_chi2, final_fit.pseudo_r2
        ),
    );
    if stats.rejected_lines + stats.dropped_papers > 0 {
        line(
            &mut lines,
            format!(
                "lenient_drops: {} rejected line(s), {} dropped paper(s)",
                stats.rejected_lines, stats.dropped_papers
            ),
        );
    }
    write_summary(
        &out_dir.join("summary.csv"),
        &lines
            .iter()
            .map(|l| split_summary_line(l))
            .collect::<Vec<_>>(),
    )?;
    Ok(CommandOutcome { lines })
}

struct DescribedColumns {
    summaries: Vec<leadflow_core::econometrics::ColumnSummary>,
    correlations: Vec<leadflow_core::econometrics::CorrelationEntry>,
    vif: Vec<leadflow_core::econometrics::VifEntry>,
}

/// Builds the descriptive table: the response plus every regressor except
/// the constant, matching how such tables are usually laid out.
fn describe_columns(inputs: &RegressionInputs) -> Result<DescribedColumns, CliError> {
    let regressors: Vec<&str> = LADDER[4][1..].to_vec();
    let (x, _) = design_columns(&inputs.dataset, &regressors)?;
    let n = inputs.dataset.n();
    let mut table = DMatrix::zeros(n, regressors.len() + 1);
    let mut names = Vec::with_capacity(regressors.len() + 1);
    names.push("y".to_string());
    for r in 0..n {
        table[(r, 0)] = inputs.dataset.y[r];
    }
    for (c, name) in regressors.iter().enumerate() {
        names.push((*name).to_string());
        for r in 0..n {
            table[(r, c + 1)] = x[(r, c)];
        }
    }
    let summaries = descriptive_stats(&table, &names)?;
    let correlations = correlation_matrix(&table, &names)?;
    // VIF is scored on the regressors only (the constant is partialled out
    // internally).
    let (full_x, full_names) = design_columns(&inputs.dataset, LADDER[4])?;
    let vif_entries = vif(&full_x, &full_names)?;
    Ok(DescribedColumns {
        summaries,
        correlations,
        vif: vif_entries,
    })
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub fn cmd_synth(config: &RunConfig, out_dir: &Path) -> Result<CommandOutcome, CliError> {
    let generated = gen_corpus(&config.synth, config.run.seed)?;
    let corpus = &generated.corpus;
    atomic_write(&out_dir.join("papers.jsonl"), |w| {
        Ok(write_papers(corpus, w)?)
    })?;
    atomic_write(&out_dir.join("registry.csv"), |w| {
        Ok(write_registry(corpus, w)?)
    })?;
    atomic_write(&out_dir.join("truth.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &generated.truth)
            .map_err(|e| CliError::data(format!("cannot serialize truth: {e}")))?;
        writeln!(w)?;
        Ok(())
    })?;

    let multi = corpus
        .papers()
        .filter(|p| p.institution_count() >= 2)
        .count();
    let mut lines = Vec::new();
    line(&mut lines, format!("papers: {}", corpus.paper_count()));
    line(
        &mut lines,
        format!("institutions: {}", corpus.registry.len()),
    );
    line(&mut lines, format!("years: {}", config.synth.years));
    line(&mut lines, format!("multi_institution_papers: {multi}"));
    line(&mut lines, format!("seed: {}", config.run.seed));
    write_summary(
        &out_dir.join("summary.csv"),
        &lines
            .iter()
            .map(|l| split_summary_line(l))
            .collect::<Vec<_>>(),
    )?;
    Ok(CommandOutcome { lines })
}

// ---------------------------------------------------------------------------
// topics
// ---------------------------------------------------------------------------

pub fn cmd_topics(config: &RunConfig, out_dir: &Path) -> Result<CommandOutcome, CliError> {
    let (corpus, _) = load_corpus(config)?;
    let field = config.run.field.as_deref();
    let slice = filter_corpus(&corpus, config.periods.lag, field);
    let lda_config = config.lda.to_lda_config(config.run.seed);
    let model = fit_lda(&slice, &lda_config)?;
    let perp = perplexity(&model, &slice)?;
    let vectors = institution_vectors(&slice, &model);

    atomic_write(&out_dir.join("topic_word.csv"), |w| {
        Ok(write_topic_word(&model, w)?)
    })?;
    atomic_write(&out_dir.join("doc_topic.csv"), |w| {
        Ok(write_doc_topic(&model, w)?)
    })?;
    atomic_write(&out_dir.join("institution_vectors.csv"), |w| {
        writeln!(w, "institution_id,topic,weight")?;
        for (id, vector) in &vectors {
            for (topic, weight) in vector.weights.iter().enumerate() {
                writeln!(w, "{id},{topic},{weight}")?;
            }
        }
        Ok(())
    })?;

    let keyword_docs = slice.papers().filter(|p| !p.keywords.is_empty()).count();
    let mut lines = Vec::new();
    line(&mut lines, format!("window: {}", config.periods.lag));
    line(&mut lines, format!("documents: {keyword_docs}"));
    line(&mut lines, format!("vocabulary: {}", model.vocab_size()));
    line(&mut lines, format!("topics: {}", lda_config.topics));
    line(&mut lines, format!("perplexity: {perp:.4}"));
    write_summary(
        &out_dir.join("summary.csv"),
        &lines
            .iter()
            .map(|l| split_summary_line(l))
            .collect::<Vec<_>>(),
    )?;
    Ok(CommandOutcome { lines })
}
