use std::collections::BTreeSet;
use std::fs::File;
use std::path::{Path, PathBuf};

use bte_core::bezier::read_bte;
use bte_core::features::read_features_csv;
use bte_core::pipeline::{
    bte_text, dedupe_report, diagnostics_csv, encode_start, feature_row, features_csv, hint_grid, load_working_mask, obs_report, read_labels,
    roundtrip_csv, run_batch, score_report, synth_start, RunConfig,
};
use bte_core::provenance::write_atomic;
use bte_core::rng::item_seed;
use bte_core::stats::{read_cohort_csv, read_scores_csv};
use bte_core::synth::SynthSpec;

use super::{Command, SpecArgs};

pub enum Fatal {
    /// Bad paths or arguments, detected before any work.
    Config(String),
    /// A whole-command failure after validation.
    Run(String),
}

const MASK_EXTENSIONS: [&str; 4] = ["png", "pgm", "pbm", "ppm"];

fn has_ext(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Expands directories to their files with one of `exts`, sorted. Explicit
/// files are kept whatever their extension. Stems must be unique since they
/// name the outputs.
fn collect_inputs(inputs: &[PathBuf], exts: &[&str]) -> Result<Vec<PathBuf>, Fatal> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = std::fs::read_dir(input).map_err(|e| Fatal::Config(format!("{}: {e}", input.display())))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && has_ext(p, exts))
                .collect();
            found.sort();
            files.extend(found);
        } else if input.is_file() {
            files.push(input.clone());
        } else {
            return Err(Fatal::Config(format!("{}: no such file or directory", input.display())));
        }
    }
    let mut seen = BTreeSet::new();
    for f in &files {
        if !seen.insert(stem(f)) {
            return Err(Fatal::Config(format!("duplicate input name {:?}", stem(f))));
        }
    }
    if files.is_empty() {
        return Err(Fatal::Config("no input files".into()));
    }
    Ok(files)
}

fn require_file(path: &Path) -> Result<(), Fatal> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Fatal::Config(format!("{}: not a readable file", path.display())))
    }
}

fn require_dir(path: &Path) -> Result<(), Fatal> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Fatal::Config(format!("{}: not a directory", path.display())))
    }
}

fn ensure_out_dir(path: &Path) -> Result<(), Fatal> {
    std::fs::create_dir_all(path).map_err(|e| Fatal::Config(format!("{}: {e}", path.display())))
}

fn ensure_parent(path: &Path) -> Result<(), Fatal> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => ensure_out_dir(p),
        _ => Ok(()),
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), String> {
    write_atomic(path, bytes).map_err(|e| format!("{}: {e}", path.display()))
}

fn find_mask(dir: &Path, start: &str) -> Result<PathBuf, String> {
    MASK_EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{start}.{ext}")))
        .find(|p| p.is_file())
        .ok_or_else(|| format!("{start}: no mask in {}", dir.display()))
}

/// Logs each failure and returns how many there were.
fn report_failures<T>(files: &[PathBuf], results: &[Result<T, String>]) -> usize {
    let mut failed = 0;
    for (f, r) in files.iter().zip(results) {
        if let Err(e) = r {
            log::error!("{}: {e}", f.display());
            failed += 1;
        }
    }
    failed
}

fn spec_for(args: &SpecArgs, seed: u64) -> SynthSpec {
    SynthSpec {
        seed,
        n_branches: args.branches,
        depth: args.depth,
        root_radius: args.root_radius,
        radius_decay: args.radius_decay,
        canvas: args.canvas,
    }
}

/// Runs one command. `Ok(n)` is the number of failed items.
pub fn run(command: &Command, cfg: &RunConfig) -> Result<usize, Fatal> {
    let prov = cfg.provenance();
    match command {
        Command::Encode { inputs, out } => {
            let files = collect_inputs(inputs, &MASK_EXTENSIONS)?;
            ensure_out_dir(out)?;
            let results = run_batch(&files, |path| {
                let id = stem(path);
                let mask = load_working_mask(path, cfg.working_size).map_err(|e| e.to_string())?;
                let enc = encode_start(&id, &mask, cfg).map_err(|e| e.to_string())?;
                write(&out.join(format!("{id}.bte")), bte_text(&enc.tree, &prov).as_bytes())?;
                log::info!("{id}: {} segments", enc.diagnostics.segments);
                Ok((id, enc.diagnostics))
            });
            let failed = report_failures(&files, &results);
            let ok: Vec<_> = results.into_iter().flatten().collect();
            write(&out.join("encode_summary.csv"), diagnostics_csv(&ok, &prov).as_bytes()).map_err(Fatal::Run)?;
            let segments: usize = ok.iter().map(|(_, d)| d.segments).sum();
            let discarded: usize = ok.iter().map(|(_, d)| d.discarded_polylines).sum();
            println!(
                "encoded {}/{} masks: {segments} segments, {discarded} discarded polylines",
                ok.len(),
                files.len()
            );
            Ok(failed)
        }
        Command::Features { inputs, masks, labels, out } => {
            let files = collect_inputs(inputs, &["bte"])?;
            require_dir(masks)?;
            let labels = match labels {
                Some(p) => {
                    require_file(p)?;
                    let text = std::fs::read_to_string(p).map_err(|e| Fatal::Config(format!("{}: {e}", p.display())))?;
                    Some(read_labels(&text).map_err(|e| Fatal::Config(format!("{}: {e}", p.display())))?)
                }
                None => None,
            };
            ensure_parent(out)?;
            let results = run_batch(&files, |path| {
                let id = stem(path);
                let tree = read_bte(path).map_err(|e| e.to_string())?;
                let mask = load_working_mask(&find_mask(masks, &id)?, cfg.working_size).map_err(|e| e.to_string())?;
                let mut row = feature_row(&id, &tree, &mask, cfg).map_err(|e| e.to_string())?;
                row.label = labels.as_ref().and_then(|l| l.get(&id).copied());
                Ok(row)
            });
            let failed = report_failures(&files, &results);
            let rows: Vec<_> = results.into_iter().flatten().collect();
            let text = features_csv(&rows, &prov).map_err(|e| Fatal::Run(e.to_string()))?;
            write(out, text.as_bytes()).map_err(Fatal::Run)?;
            println!("features for {}/{} trees", rows.len(), files.len());
            Ok(failed)
        }
        Command::Perturb { inputs, masks, out } | Command::Hint { inputs, masks, out } => {
            let hints = matches!(command, Command::Hint { .. });
            let files = collect_inputs(inputs, &["bte"])?;
            require_dir(masks)?;
            ensure_out_dir(out)?;
            let results = run_batch(&files, |path| {
                let start = stem(path);
                let tree = read_bte(path).map_err(|e| e.to_string())?;
                let mask = load_working_mask(&find_mask(masks, &start)?, cfg.working_size).map_err(|e| e.to_string())?;
                let grid = hint_grid(&start, &tree, &mask, cfg).map_err(|e| e.to_string())?;
                for art in &grid {
                    let name = art.stem(&start);
                    if hints {
                        write(&out.join(format!("{name}.btef")), &art.btef)?;
                        if let Some(png) = &art.preview {
                            write(&out.join(format!("{name}.png")), png)?;
                        }
                    } else {
                        write(&out.join(format!("{name}.bte")), art.bte.as_bytes())?;
                    }
                }
                Ok(grid.len())
            });
            let failed = report_failures(&files, &results);
            let written: usize = results.iter().flatten().sum();
            println!("{written} {} for {} starts", if hints { "hints" } else { "trees" }, files.len() - failed);
            Ok(failed)
        }
        Command::Score { scores, out } => {
            require_file(scores)?;
            ensure_out_dir(out)?;
            let file = File::open(scores).map_err(|e| Fatal::Run(format!("{}: {e}", scores.display())))?;
            let table = read_scores_csv(file).map_err(|e| Fatal::Run(format!("{}: {e}", scores.display())))?;
            let report = score_report(&table, cfg).map_err(|e| Fatal::Run(e.to_string()))?;
            for (name, text) in [
                ("causal.csv", &report.causal_csv),
                ("causal.txt", &report.causal_text),
                ("causal_strict.csv", &report.strict_csv),
                ("contrast.csv", &report.contrast_csv),
            ] {
                write(&out.join(name), text.as_bytes()).map_err(Fatal::Run)?;
            }
            print!("{}", report.causal_text);
            Ok(0)
        }
        Command::Obs { features, labels, out } => {
            require_file(features)?;
            if let Some(p) = labels {
                require_file(p)?;
            }
            ensure_out_dir(out)?;
            let file = File::open(features).map_err(|e| Fatal::Run(format!("{}: {e}", features.display())))?;
            let mut rows = read_features_csv(file).map_err(|e| Fatal::Run(format!("{}: {e}", features.display())))?;
            if let Some(p) = labels {
                let text = std::fs::read_to_string(p).map_err(|e| Fatal::Run(format!("{}: {e}", p.display())))?;
                let map = read_labels(&text).map_err(|e| Fatal::Run(format!("{}: {e}", p.display())))?;
                for r in &mut rows {
                    r.label = map.get(&r.id).copied();
                }
            }
            let (csv, text) = obs_report(&rows, &prov).map_err(|e| Fatal::Run(e.to_string()))?;
            write(&out.join("observational.csv"), csv.as_bytes()).map_err(Fatal::Run)?;
            write(&out.join("observational.txt"), text.as_bytes()).map_err(Fatal::Run)?;
            print!("{text}");
            Ok(0)
        }
        Command::Dedupe { cohort, out } => {
            require_file(cohort)?;
            ensure_parent(out)?;
            let file = File::open(cohort).map_err(|e| Fatal::Run(format!("{}: {e}", cohort.display())))?;
            let rows = read_cohort_csv(file).map_err(|e| Fatal::Run(format!("{}: {e}", cohort.display())))?;
            let (csv, rep) = dedupe_report(&rows, &prov).map_err(|e| Fatal::Run(e.to_string()))?;
            write(out, csv.as_bytes()).map_err(Fatal::Run)?;
            println!(
                "removed {} of {} rows: {} train rows sharing a test subject, {} val duplicates, {} test duplicates",
                rep.removed(),
                rep.input_rows,
                rep.anti_leakage,
                rep.val_collapsed,
                rep.test_collapsed
            );
            Ok(0)
        }
        Command::Synth { spec, count, out } => {
            spec_for(spec, 0).validate().map_err(|e| Fatal::Config(e.to_string()))?;
            ensure_out_dir(out)?;
            let ids: Vec<String> = (0..*count).map(|i| format!("synth_{i:03}")).collect();
            let results = run_batch(&ids, |id| {
                let art = synth_start(&spec_for(spec, item_seed(cfg.seed, id)), &prov).map_err(|e| e.to_string())?;
                write(&out.join(format!("{id}.png")), &art.mask_png)?;
                write(&out.join(format!("{id}.bte")), art.bte.as_bytes())?;
                write(&out.join(format!("{id}_truth.csv")), art.truth_csv.as_bytes())?;
                Ok(())
            });
            let names: Vec<PathBuf> = ids.iter().map(PathBuf::from).collect();
            let failed = report_failures(&names, &results);
            println!("generated {}/{} synthetic starts", count - failed, count);
            Ok(failed)
        }
        Command::Roundtrip { spec, out } => {
            let spec = spec_for(spec, cfg.seed);
            spec.validate().map_err(|e| Fatal::Config(e.to_string()))?;
            if let Some(p) = out {
                ensure_parent(p)?;
            }
            let csv = roundtrip_csv(&spec, &prov).map_err(|e| Fatal::Run(e.to_string()))?;
            match out {
                Some(p) => write(p, csv.as_bytes()).map_err(Fatal::Run)?,
                None => print!("{csv}"),
            }
            Ok(0)
        }
    }
}
