use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use vqe_core::degrade::{intensity_histogram, run_recipe, sample_recipe, DegradationProfile, DegradationRecipe, Histogram};
use vqe_core::enhance::arch::{predictor_spec, restorer_preset, unet_restorer};
use vqe_core::enhance::{
    continue_stage1, continue_stage2, enhance_clip, enhance_frame, finetune_joint, pairs_from_clips, train_stage1, train_stage2,
    EnhanceReport, ScoringSuite, StageOneModel, StageTwoModel, TrainConfig, TrainLog,
};
use vqe_core::eval::{
    bt_fit, mos_for, rank_with_tiebreak, read_votes, rmse, s_real_all, s_synth, votes_to_counts, BtOptions, ObjectiveScore, PairTable,
    VoteWeighting,
};
use vqe_core::media::{read_clip, read_manifest, write_clip, write_manifest, write_scores, Clip, LoadedManifest, Manifest, ManifestEntry, Role};
use vqe_core::nn::{audit_macs, count_macs, ModelSpec};
use vqe_core::rng::SeededRng;
use vqe_study::{Study, StudyConfig, VOTES_FILE};

use crate::args::*;
use crate::error::{require_exists, CliError};

type Result<T> = std::result::Result<T, CliError>;

/// Runs one subcommand and returns its exit code.
pub fn dispatch(command: Command) -> Result<u8> {
    match command {
        Command::Degrade(a) => degrade(&a),
        Command::TrainStage1(a) => train(&a, Stage::One),
        Command::TrainStage2(a) => train(&a, Stage::Two),
        Command::Finetune(a) => train(&a, Stage::Joint),
        Command::Enhance(a) => enhance(&a),
        Command::Rmse(a) => rmse_cmd(&a),
        Command::Score(a) => score(&a),
        Command::Rank(a) => rank(&a),
        Command::Mos(a) => mos(&a),
        Command::Macs(a) => macs(&a),
        Command::Stats(a) => stats(&a),
        Command::Serve(a) => serve(&a),
        Command::ExportVotes(a) => export_votes(&a),
    }
    .map(|pass| if pass { 0 } else { 1 })
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))
}

fn write_text(out: &Path, name: &str, text: &str) -> Result<()> {
    let path = out.join(name);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<()> {
    write_text(out, name, &serde_json::to_string_pretty(value).expect("outputs serialize"))
}

fn read_text(path: &Path) -> Result<String> {
    require_exists(path)?;
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_json_value(path: &Path) -> Result<Value> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Writes `run_config.json`: the parsed arguments plus everything they resolved to.
fn record<A: Serialize>(out: &Path, command: &str, args: &A, resolved: Value) -> Result<()> {
    let doc = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
        "resolved": resolved,
    });
    write_json(out, "run_config.json", &doc)
}

fn load_clip(dir: &Path, fps: f64) -> Result<Clip> {
    require_exists(dir)?;
    Ok(read_clip(dir, fps)?)
}

fn load_manifest(path: &Path) -> Result<LoadedManifest> {
    require_exists(path)?;
    Ok(read_manifest(path)?)
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::path::absolute(path).map_err(|e| CliError::io(path, e))
}

fn parse_weighting(s: &str) -> Result<VoteWeighting> {
    serde_json::from_value(Value::String(s.into()))
        .map_err(|_| CliError::Validation(format!("unknown weighting {s:?} (expected single or strong)")))
}

fn degrade(a: &DegradeArgs) -> Result<bool> {
    let fixed = match &a.recipe {
        Some(p) => Some(DegradationRecipe::from_json(&read_text(p)?)?),
        None => None,
    };
    let profile = match &fixed {
        Some(_) => None,
        None => Some(match DegradationProfile::preset(&a.profile) {
            Some(p) => p,
            None => serde_json::from_value(read_json_value(Path::new(&a.profile))?)
                .map_err(|e| CliError::Validation(format!("profile {}: {e}", a.profile)))?,
        }),
    };
    // (source clip, output id, target entry to pair with)
    let mut jobs: Vec<(Clip, String, Option<ManifestEntry>)> = Vec::new();
    match (&a.input, &a.manifest) {
        (Some(dir), _) => {
            let clip = load_clip(dir, a.fps)?;
            let id = clip.id().to_string();
            jobs.push((clip, id, None));
        }
        (None, Some(m)) => {
            let loaded = load_manifest(m)?;
            for e in loaded.manifest.entries().iter().filter(|e| e.role == Role::Target) {
                let id = format!("{}_deg", e.clip_id);
                if loaded.manifest.get(&id).is_some() {
                    return Err(CliError::Validation(format!("output id {id} collides with a manifest clip")));
                }
                let target = ManifestEntry { path: absolute(&loaded.resolve(e))?, ..e.clone() };
                jobs.push((loaded.load_clip(e)?, id, Some(target)));
            }
            if jobs.is_empty() {
                return Err(CliError::Validation(format!("{} lists no target clips", m.display())));
            }
        }
        (None, None) => return Err(CliError::Validation("one of --in or --manifest is required".into())),
    }

    prepare_out(&a.out)?;
    let mut rng = SeededRng::new(a.seed);
    let mut recipes = BTreeMap::new();
    let mut entries = Vec::new();
    for (clip, id, target) in jobs {
        let recipe = match (&fixed, &profile) {
            (Some(r), _) => r.clone(),
            (None, Some(p)) => sample_recipe(&mut rng, p)?,
            (None, None) => unreachable!("profile is set whenever no recipe is given"),
        };
        let out = run_recipe(&clip, &recipe)?;
        write_clip(&out, &a.out.join(&id))?;
        println!("{id}: {} frames, recipe seed {}", out.len(), recipe.seed);
        if let Some(t) = target {
            entries.push(ManifestEntry {
                clip_id: id.clone(),
                role: Role::Input,
                path: PathBuf::from(&id),
                fps: t.fps,
                pair: Some(t.clip_id.clone()),
            });
            entries.push(t);
        }
        recipes.insert(id, recipe);
    }
    write_json(&a.out, "recipes.json", &recipes)?;
    if !entries.is_empty() {
        write_manifest(&Manifest::new(entries)?, &a.out.join("manifest.json"))?;
    }
    record(&a.out, "degrade", a, json!({ "profile": profile, "recipe": fixed }))?;
    Ok(true)
}

#[derive(Clone, Copy)]
enum Stage {
    One,
    Two,
    Joint,
}

fn set_path(root: &mut Value, dotted: &str, value: Value) {
    let mut cur = root;
    let parts: Vec<&str> = dotted.split('.').collect();
    for p in &parts[..parts.len() - 1] {
        if !cur.get(*p).is_some_and(Value::is_object) {
            cur[*p] = json!({});
        }
        cur = &mut cur[*p];
    }
    cur[parts[parts.len() - 1]] = value;
}

/// Flag overrides as a JSON layer: `--set` entries first, then the named flags.
fn overrides(a: &TrainArgs) -> Result<Value> {
    let mut ov = json!({});
    for s in &a.set {
        let (key, raw) = s
            .split_once('=')
            .filter(|(k, _)| !k.is_empty() && k.split('.').all(|p| !p.is_empty()))
            .ok_or_else(|| CliError::Validation(format!("--set expects key.path=value, got {s:?}")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
        set_path(&mut ov, key, value);
    }
    if let Some(v) = a.seed {
        set_path(&mut ov, "seed", json!(v));
    }
    if let Some(v) = a.iterations {
        set_path(&mut ov, "iterations", json!(v));
    }
    if let Some(v) = a.lr {
        set_path(&mut ov, "lr.initial", json!(v));
    }
    if let Some(v) = a.batch {
        set_path(&mut ov, "batch", json!(v));
    }
    if let Some(v) = a.patch {
        set_path(&mut ov, "patch", json!(v));
    }
    Ok(ov)
}

fn resolve_config(a: &TrainArgs) -> Result<TrainConfig> {
    let file = a.config.as_deref().map(read_json_value).transpose()?;
    let ov = overrides(a)?;
    Ok(TrainConfig::resolve(a.preset.as_deref(), file.as_ref(), Some(&ov))?)
}

fn train(a: &TrainArgs, stage: Stage) -> Result<bool> {
    let config = resolve_config(a)?;
    let clips = load_manifest(&a.manifest)?.load_pairs(Role::Input)?;
    if clips.is_empty() {
        return Err(CliError::Validation(format!("{} has no input clips paired with targets", a.manifest.display())));
    }
    let s1 = a.stage1.as_deref().map(|d| require_exists(d).and_then(|_| Ok(StageOneModel::load(d)?))).transpose()?;
    let s2 = a.stage2.as_deref().map(|d| require_exists(d).and_then(|_| Ok(StageTwoModel::load(d)?))).transpose()?;
    prepare_out(&a.out)?;
    let (name, log): (&str, TrainLog) = match stage {
        Stage::One => {
            let pairs = pairs_from_clips(&clips)?;
            let (model, log) = match s1 {
                Some(m) => continue_stage1(m, &pairs, &config)?,
                None => train_stage1(&pairs, &config)?,
            };
            model.save(&a.out.join("stage1"))?;
            ("train-stage1", log)
        }
        Stage::Two => {
            let clips = match &s1 {
                Some(m) => cascade(m, clips)?,
                None => clips,
            };
            let pairs = pairs_from_clips(&clips)?;
            let (model, log) = match s2 {
                Some(m) => continue_stage2(m, &pairs, &config)?,
                None => train_stage2(&pairs, &config)?,
            };
            model.save(&a.out.join("stage2"))?;
            ("train-stage2", log)
        }
        Stage::Joint => {
            let (Some(m1), Some(m2)) = (s1, s2) else {
                return Err(CliError::Validation("finetune needs --stage1 and --stage2".into()));
            };
            let pairs = pairs_from_clips(&clips)?;
            let (m1, m2, log) = finetune_joint(m1, m2, &pairs, &config)?;
            m1.save(&a.out.join("stage1"))?;
            m2.save(&a.out.join("stage2"))?;
            ("finetune", log)
        }
    };
    write_json(&a.out, "train_log.json", &log)?;
    println!(
        "{name}: {} steps, loss {:.6} -> {:.6}",
        log.losses.len(),
        log.losses.first().copied().unwrap_or(f64::NAN),
        log.last().unwrap_or(f64::NAN)
    );
    record(&a.out, name, a, serde_json::to_value(&config).expect("config serializes"))?;
    Ok(true)
}

/// Replaces each input clip with its stage-one output.
fn cascade(s1: &StageOneModel, clips: Vec<(Clip, Clip)>) -> Result<Vec<(Clip, Clip)>> {
    clips
        .into_iter()
        .map(|(input, target)| {
            let frames = input.frames().iter().map(|f| enhance_frame(s1, None, f)).collect::<std::result::Result<Vec<_>, _>>()?;
            Ok((input.with_frames(frames)?, target))
        })
        .collect()
}

fn enhance(a: &EnhanceArgs) -> Result<bool> {
    require_exists(&a.stage1)?;
    let s1 = StageOneModel::load(&a.stage1)?;
    let s2 = match &a.stage2 {
        Some(d) => {
            require_exists(d)?;
            Some(StageTwoModel::load(d)?)
        }
        None => None,
    };
    // (clip, target entry)
    let mut jobs: Vec<(Clip, Option<ManifestEntry>)> = Vec::new();
    match (&a.input, &a.manifest) {
        (Some(dir), _) => jobs.push((load_clip(dir, a.fps)?, None)),
        (None, Some(m)) => {
            let loaded = load_manifest(m)?;
            for (src, tgt) in loaded.manifest.pairs(Role::Input) {
                let target = ManifestEntry { path: absolute(&loaded.resolve(tgt))?, ..tgt.clone() };
                jobs.push((loaded.load_clip(src)?, Some(target)));
            }
            if jobs.is_empty() {
                return Err(CliError::Validation(format!("{} has no input clips paired with targets", m.display())));
            }
        }
        (None, None) => return Err(CliError::Validation("one of --in or --manifest is required".into())),
    }
    prepare_out(&a.out)?;
    let mut reports: BTreeMap<String, EnhanceReport> = BTreeMap::new();
    let mut entries: Vec<ManifestEntry> = Vec::new();
    let mut all_pass = true;
    for (clip, target) in jobs {
        let (out, mut report) = enhance_clip(&s1, s2.as_ref(), &clip)?;
        report.audit = audit_macs(report.macs_total, Some(a.budget));
        all_pass &= report.audit.pass;
        let id = clip.id().to_string();
        write_clip(&out, &a.out.join(&id))?;
        println!(
            "{id}: {} frames, {:.1} ms/frame, {:.3e} MACs/frame {}",
            report.frames,
            report.latency_ms_mean,
            report.macs_total as f64,
            if report.audit.pass { "PASS" } else { "FAIL" }
        );
        if let Some(t) = target {
            entries.push(ManifestEntry {
                clip_id: id.clone(),
                role: Role::Prediction,
                path: PathBuf::from(&id),
                fps: clip.fps(),
                pair: Some(t.clip_id.clone()),
            });
            if !entries.iter().any(|e| e.clip_id == t.clip_id) {
                entries.push(t);
            }
        }
        reports.insert(id, report);
    }
    write_json(&a.out, "report.json", &reports)?;
    if !entries.is_empty() {
        write_manifest(&Manifest::new(entries)?, &a.out.join("manifest.json"))?;
    }
    record(&a.out, "enhance", a, json!({ "stage1": s1.digest(), "stage2": s2.as_ref().map(StageTwoModel::digest), "all_pass": all_pass }))?;
    Ok(true)
}

/// Output of `rmse`, input to `score --rmse`.
#[derive(Debug, Serialize, Deserialize)]
pub struct RmseFile {
    pub clips: BTreeMap<String, f64>,
    pub mean: f64,
}

fn rmse_cmd(a: &RmseArgs) -> Result<bool> {
    let mut clips = BTreeMap::new();
    match (&a.manifest, &a.pred, &a.target) {
        (Some(m), _, _) => {
            let pairs = load_manifest(m)?.load_pairs(Role::Prediction)?;
            if pairs.is_empty() {
                return Err(CliError::Validation(format!("{} has no prediction clips paired with targets", m.display())));
            }
            for (p, t) in pairs {
                clips.insert(p.id().to_string(), rmse(&p, &t)?);
            }
        }
        (None, Some(p), Some(t)) => {
            let (p, t) = (load_clip(p, 30.0)?, load_clip(t, 30.0)?);
            clips.insert(p.id().to_string(), rmse(&p, &t)?);
        }
        _ => return Err(CliError::Validation("give --manifest or both --pred and --target".into())),
    }
    let mean = clips.values().sum::<f64>() / clips.len() as f64;
    for (id, v) in &clips {
        println!("{id}: {v:.6}");
    }
    println!("mean: {mean:.6}");
    prepare_out(&a.out)?;
    let file = RmseFile { clips, mean };
    write_json(&a.out, "rmse.json", &file)?;
    record(&a.out, "rmse", a, json!({ "clips": file.clips.len() }))?;
    Ok(true)
}

fn scorer(spec: &str) -> Result<ScoringSuite> {
    match spec.split_once(':') {
        None if spec == "stub" => Ok(ScoringSuite::stub("")),
        Some(("stub", salt)) => Ok(ScoringSuite::stub(salt)),
        _ => Err(CliError::Validation(format!("unknown scorer {spec:?} (expected stub or stub:SALT)"))),
    }
}

fn score(a: &ScoreArgs) -> Result<bool> {
    let suite = scorer(&a.scorer)?;
    let mut clips = Vec::new();
    for dir in &a.input {
        clips.push(load_clip(dir, a.fps)?);
    }
    if let Some(m) = &a.manifest {
        let role: Role = serde_json::from_value(Value::String(a.role.clone()))
            .map_err(|_| CliError::Validation(format!("unknown role {:?}", a.role)))?;
        let loaded = load_manifest(m)?;
        for e in loaded.manifest.entries().iter().filter(|e| e.role == role) {
            clips.push(loaded.load_clip(e)?);
        }
    }
    if clips.is_empty() {
        return Err(CliError::Validation("no clips to score".into()));
    }
    let rmses = a.rmse.as_deref().map(read_json_value).transpose()?;
    let scores = suite.score_clips(&clips)?;
    prepare_out(&a.out)?;
    write_scores(&scores, &a.out.join("scores.json"))?;
    let s_real = s_real_all(&scores)?;
    println!("s_real: {s_real:.6}");
    if let Some(v) = rmses {
        let file: RmseFile = serde_json::from_value(v).map_err(|e| CliError::Validation(format!("rmse file: {e}")))?;
        let values: Vec<f64> = file.clips.values().copied().collect();
        let objective = ObjectiveScore::new(s_real, s_synth(&values)?);
        println!("s_synth: {:.6}\ns_obj: {:.6}", objective.s_synth, objective.s_obj);
        write_json(&a.out, "objective.json", &BTreeMap::from([(a.method.clone(), objective)]))?;
    }
    record(&a.out, "score", a, json!({ "clips": clips.len() }))?;
    Ok(true)
}

fn rank(a: &RankArgs) -> Result<bool> {
    require_exists(&a.votes)?;
    let votes = read_votes(&a.votes)?;
    let table: PairTable = match &a.pairs {
        Some(p) => serde_json::from_value(read_json_value(p)?).map_err(|e| CliError::Validation(format!("pair table: {e}")))?,
        None => PairTable::from_votes(&votes),
    };
    let counts = votes_to_counts(&votes, &table, parse_weighting(&a.weighting)?)?;
    let mut objective: BTreeMap<String, ObjectiveScore> = BTreeMap::new();
    for p in &a.objective {
        let part: BTreeMap<String, ObjectiveScore> =
            serde_json::from_value(read_json_value(p)?).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
        objective.extend(part);
    }
    let fit = bt_fit(&counts, BtOptions::default())?;
    let ranking = rank_with_tiebreak(&fit.ranking, &objective)?;
    for r in &ranking {
        println!("{:>3}  {:<20} {:+.4}  [{:+.4}, {:+.4}]", r.rank, r.method, r.bt_score, r.ci_low, r.ci_high);
    }
    prepare_out(&a.out)?;
    write_json(&a.out, "ranking.json", &ranking)?;
    write_text(&a.out, "bt_scores.json", &fit.ranking.to_json())?;
    write_text(&a.out, "intervals.csv", &fit.ranking.to_csv())?;
    record(
        &a.out,
        "rank",
        a,
        json!({ "votes": votes.len(), "iterations": fit.iterations, "converged": fit.converged, "objective": objective }),
    )?;
    Ok(true)
}

fn mos(a: &MosArgs) -> Result<bool> {
    require_exists(&a.votes)?;
    let votes = read_votes(&a.votes)?;
    let value = mos_for(&votes, &a.target)?;
    println!("MOS {}: {value:.4}", a.target);
    if let Some(out) = &a.out {
        prepare_out(out)?;
        write_json(out, "mos.json", &json!({ "target": a.target, "mos": value }))?;
        record(out, "mos", a, json!({ "votes": votes.len() }))?;
    }
    Ok(true)
}

fn parse_res(s: &str) -> Result<(usize, usize)> {
    s.split_once(['x', 'X'])
        .and_then(|(w, h)| Some((w.parse().ok()?, h.parse().ok()?)))
        .filter(|&(w, h)| w > 0 && h > 0)
        .ok_or_else(|| CliError::Validation(format!("resolution {s:?} is not WIDTHxHEIGHT")))
}

/// Default predictor input side and bank size.
const PREDICTOR_INPUT: usize = 64;
const BANK_K: usize = 5;

fn macs(a: &MacsArgs) -> Result<bool> {
    let (w, h) = parse_res(&a.res)?;
    let total = match a.model.strip_prefix("preset:") {
        Some("predictor") => count_macs(&predictor_spec(BANK_K), PREDICTOR_INPUT, PREDICTOR_INPUT)?,
        Some("two-stage") => {
            count_macs(&predictor_spec(BANK_K), PREDICTOR_INPUT, PREDICTOR_INPUT)? + count_macs(&unet_restorer(), h, w)?
        }
        Some(name) => {
            let spec = restorer_preset(name.strip_suffix("-restorer").unwrap_or(name))?;
            count_macs(&spec, h, w)?
        }
        None => {
            let spec: ModelSpec = serde_json::from_value(read_json_value(Path::new(&a.model))?)
                .map_err(|e| CliError::Validation(format!("model spec {}: {e}", a.model)))?;
            count_macs(&spec, h, w)?
        }
    };
    let report = audit_macs(total, Some(a.budget));
    let verdict = if report.pass { "PASS" } else { "FAIL" };
    println!("{} @ {w}x{h}: {total} MACs/frame ({:.3e}), budget {:.3e}: {verdict}", a.model, total as f64, a.budget);
    if let Some(out) = &a.out {
        prepare_out(out)?;
        write_json(out, "macs.json", &json!({ "model": a.model, "width": w, "height": h, "audit": report }))?;
        record(out, "macs", a, json!({}))?;
    }
    Ok(report.pass)
}

fn stats(a: &StatsArgs) -> Result<bool> {
    let mut all: BTreeMap<String, Histogram> = BTreeMap::new();
    for dir in &a.input {
        let clip = load_clip(dir, 30.0)?;
        let h = intensity_histogram(&clip, a.bins)?;
        let mode = h.mode_bin();
        println!("{}: mean {:.2}, mode bin {mode} (from {:.1}), {} pixels", clip.id(), h.mean, h.bin_start(mode), h.total);
        all.insert(clip.id().to_string(), h);
    }
    if let Some(out) = &a.out {
        prepare_out(out)?;
        write_json(out, "histograms.json", &all)?;
        record(out, "stats", a, json!({}))?;
    }
    Ok(true)
}

fn serve(a: &ServeArgs) -> Result<bool> {
    require_exists(&a.config)?;
    let mut config = StudyConfig::read(&a.config)?;
    if let Some(p) = a.port {
        config.port = p;
    }
    if let Some(b) = &a.bind {
        config.bind = b.clone();
    }
    if let Some(s) = &a.static_dir {
        require_exists(s)?;
        config.static_dir = Some(s.clone());
    }
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    println!("serving on http://{}:{}", config.bind, config.port);
    runtime.block_on(vqe_study::serve(config))?;
    Ok(true)
}

fn export_votes(a: &ExportArgs) -> Result<bool> {
    require_exists(&a.config)?;
    let config = StudyConfig::read(&a.config)?;
    // Opening a study with no log would create one in its data directory.
    require_exists(&config.data_dir.join(VOTES_FILE))?;
    let study = Study::open(&config)?;
    let counts = study.counts(parse_weighting(&a.weighting)?)?;
    prepare_out(&a.out)?;
    let bytes = study.export()?;
    let path = a.out.join(VOTES_FILE);
    fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    write_json(&a.out, "pairs.json", &study.pair_table())?;
    write_json(&a.out, "counts.json", &counts)?;
    println!("{} votes over {} pairs", study.votes().len(), study.pair_table().pairs.len());
    record(&a.out, "export-votes", a, json!({ "votes": study.votes().len() }))?;
    Ok(true)
}
