use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use auvrl::config::{Algorithm, EnvKind, TrainConfig};
use auvrl::error::Error;
use auvrl::run::{
    cmd_compare, cmd_eval, cmd_terrain_preview, cmd_train, Checkpoint, CHECKPOINT_FILE, CONFIG_FILE, CURVE_FILE,
    DIAGNOSTICS_FILE, EVAL_CURVE_FILE, INIT_CHECKPOINT_FILE, INIT_METRICS_FILE, METRICS_FILE, RECORD_FILE,
};
use tempfile::TempDir;

fn small_dpg(seed: u64, out: &Path) -> TrainConfig {
    let mut cfg = TrainConfig::new(Algorithm::Dpg, EnvKind::Seafloor, seed);
    cfg.output_dir = out.to_path_buf();
    cfg.eval_every = 2;
    cfg.eval_episodes = 2;
    cfg.dpg.actor_hidden = vec![16];
    cfg.dpg.critic_hidden = vec![16, 16];
    cfg.dpg.episodes = 4;
    cfg.dpg.warmup_steps = 100;
    cfg
}

fn small_ppo(seed: u64, out: &Path) -> TrainConfig {
    let mut cfg = TrainConfig::new(Algorithm::Ppo, EnvKind::Pipe, seed);
    cfg.output_dir = out.to_path_buf();
    cfg.eval_every = 3;
    cfg.eval_episodes = 2;
    cfg.ppo.hidden = vec![16];
    cfg.ppo.value_hidden = vec![16];
    cfg.ppo.rollout_steps = 256;
    cfg.ppo.iterations = 2;
    cfg
}

fn pid(environment: EnvKind, out: &Path) -> TrainConfig {
    let mut cfg = TrainConfig::new(Algorithm::Pid, environment, 0);
    cfg.output_dir = out.to_path_buf();
    cfg.eval_episodes = 2;
    cfg
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn assert_same_csvs(a: &Path, b: &Path) {
    let (fa, fb) = (csv_files(a), csv_files(b));
    assert!(!fa.is_empty());
    assert_eq!(
        fa.iter().map(|f| &f.0).collect::<Vec<_>>(),
        fb.iter().map(|f| &f.0).collect::<Vec<_>>()
    );
    for ((name, x), (_, y)) in fa.iter().zip(&fb) {
        assert!(x == y, "{name} differs between reruns");
    }
}

#[test]
fn reruns_write_byte_identical_csvs() {
    let tmp = TempDir::new().unwrap();
    type Builder = fn(u64, &Path) -> TrainConfig;
    let builders: [(&str, Builder); 2] = [("dpg", small_dpg), ("ppo", small_ppo)];
    for (name, build) in builders {
        let a = cmd_train(&build(3, &tmp.path().join(format!("{name}_a")))).unwrap();
        let b = cmd_train(&build(3, &tmp.path().join(format!("{name}_b")))).unwrap();
        assert_same_csvs(&a, &b);
        assert!(a.join(EVAL_CURVE_FILE).exists());

        let cfg = build(3, &a);
        let (ea, eb) = (tmp.path().join(format!("{name}_eval_a")), tmp.path().join(format!("{name}_eval_b")));
        cmd_eval(&a.join(CHECKPOINT_FILE), &cfg, 2, &ea).unwrap();
        cmd_eval(&b.join(CHECKPOINT_FILE), &cfg, 2, &eb).unwrap();
        assert_same_csvs(&ea, &eb);
    }
}

#[test]
fn different_seeds_give_different_curves() {
    let tmp = TempDir::new().unwrap();
    let a = cmd_train(&small_dpg(1, &tmp.path().join("a"))).unwrap();
    let b = cmd_train(&small_dpg(2, &tmp.path().join("b"))).unwrap();
    assert_ne!(fs::read(a.join(CURVE_FILE)).unwrap(), fs::read(b.join(CURVE_FILE)).unwrap());
}

#[test]
fn run_directory_holds_its_resolved_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_ppo(5, &tmp.path().join("run"));
    let dir = cmd_train(&cfg).unwrap();
    for file in [CONFIG_FILE, CURVE_FILE, CHECKPOINT_FILE, INIT_CHECKPOINT_FILE, METRICS_FILE, INIT_METRICS_FILE, RECORD_FILE] {
        assert!(dir.join(file).exists(), "{file} missing");
    }
    assert_eq!(TrainConfig::load(&dir.join(CONFIG_FILE)).unwrap(), cfg);
    let record: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join(RECORD_FILE)).unwrap()).unwrap();
    assert_eq!(record["algorithm"], "ppo");
    assert_eq!(record["checkpoint"], CHECKPOINT_FILE);
    assert_eq!(Checkpoint::load(&dir.join(CHECKPOINT_FILE)).unwrap().algorithm(), Algorithm::Ppo);
}

#[test]
fn curve_episodes_increase() {
    let tmp = TempDir::new().unwrap();
    let dir = cmd_train(&small_dpg(4, &tmp.path().join("run"))).unwrap();
    let mut reader = csv::Reader::from_path(dir.join(CURVE_FILE)).unwrap();
    let episodes: Vec<usize> = reader.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    assert_eq!(episodes, (0..episodes.len()).collect::<Vec<_>>());
    assert_eq!(episodes.len(), 4);
}

#[test]
fn missing_seed_is_reported_by_name() {
    let err = TrainConfig::from_toml_str("algorithm = \"dpg\"\nenvironment = \"seafloor\"\n").unwrap_err();
    match err {
        Error::Config { field, .. } => assert_eq!(field, "seed"),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let text = "algorithm = \"dpg\"\nenvironment = \"seafloor\"\nseed = 1\n\n[dpg]\nlearning_rate = 0.1\n";
    match TrainConfig::from_toml_str(text).unwrap_err() {
        Error::Config { field, .. } => assert_eq!(field, "learning_rate"),
        other => panic!("unexpected error {other}"),
    }
}

#[test]
fn shipped_configs_load_and_round_trip() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|x| x == "toml") {
            let cfg = TrainConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let again = TrainConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
            assert_eq!(again, cfg, "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

#[test]
fn zero_episode_eval_writes_only_the_header() {
    let tmp = TempDir::new().unwrap();
    let cfg = pid(EnvKind::Seafloor, &tmp.path().join("run"));
    let dir = cmd_train(&cfg).unwrap();
    let out = tmp.path().join("eval");
    let rows = cmd_eval(&dir.join(CHECKPOINT_FILE), &cfg, 0, &out).unwrap();
    assert!(rows.is_empty());
    assert_eq!(
        fs::read_to_string(out.join(METRICS_FILE)).unwrap(),
        "episode,return,mean_reward,mean_abs_dz,visible_fraction,steps\n"
    );
}

#[test]
fn untrained_checkpoint_reproduces_the_stored_init_metrics() {
    let tmp = TempDir::new().unwrap();
    for cfg in [small_dpg(6, &tmp.path().join("dpg")), small_ppo(6, &tmp.path().join("ppo"))] {
        let dir = cmd_train(&cfg).unwrap();
        let out = dir.join("init_eval");
        cmd_eval(&dir.join(INIT_CHECKPOINT_FILE), &cfg, cfg.eval_episodes, &out).unwrap();
        assert_eq!(
            fs::read(out.join(METRICS_FILE)).unwrap(),
            fs::read(dir.join(INIT_METRICS_FILE)).unwrap()
        );
    }
}

#[test]
fn seafloor_trajectory_columns() {
    let tmp = TempDir::new().unwrap();
    let cfg = pid(EnvKind::Seafloor, &tmp.path().join("run"));
    let dir = cmd_train(&cfg).unwrap();
    let out = tmp.path().join("eval");
    cmd_eval(&dir.join(CHECKPOINT_FILE), &cfg, 1, &out).unwrap();
    let text = fs::read_to_string(out.join("trajectory_000.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x_along,seafloor_z,target_z,z,theta,w,q,u1,u2,reward");
    assert!(lines.all(|l| l.split(',').count() == 11));
}

#[test]
fn width_mismatch_names_both_shapes() {
    let tmp = TempDir::new().unwrap();
    let cfg = small_ppo(7, &tmp.path().join("run"));
    let dir = cmd_train(&cfg).unwrap();
    let seafloor = pid(EnvKind::Seafloor, &tmp.path().join("other"));
    let err = cmd_eval(&dir.join(CHECKPOINT_FILE), &seafloor, 1, &tmp.path().join("eval")).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::Domain(_)), "{msg}");
    assert!(msg.contains("inputs") && msg.contains("environment"), "{msg}");
}

#[test]
fn comparing_a_run_with_itself_gives_zero_deltas() {
    let tmp = TempDir::new().unwrap();
    let dir = cmd_train(&small_dpg(8, &tmp.path().join("run"))).unwrap();
    let cmp = cmd_compare(&[dir.clone(), dir], f64::NEG_INFINITY).unwrap();
    assert_eq!(cmp.rows[0], cmp.rows[1]);
    let mut buf = Vec::new();
    cmp.write_csv(&mut buf).unwrap();
    let mut reader = csv::Reader::from_reader(buf.as_slice());
    let header = reader.headers().unwrap().clone();
    assert_eq!(&header[6], "delta_mean_reward");
    assert_eq!(&header[7], "delta_mean_abs_dz");
    for rec in reader.records() {
        let rec = rec.unwrap();
        assert_eq!(rec[6].parse::<f64>().unwrap(), 0.0);
        assert_eq!(rec[7].parse::<f64>().unwrap(), 0.0);
        assert_eq!(&rec[5], "0");
    }
}

#[test]
fn compare_names_a_missing_run_directory() {
    let tmp = TempDir::new().unwrap();
    let dir = cmd_train(&pid(EnvKind::Seafloor, &tmp.path().join("run"))).unwrap();
    let missing = tmp.path().join("no_such_run");
    let msg = cmd_compare(&[dir, missing.clone()], 0.0).unwrap_err().to_string();
    assert!(msg.contains(&missing.display().to_string()), "{msg}");
}

#[test]
fn compare_rejects_mixed_environments() {
    let tmp = TempDir::new().unwrap();
    let a = cmd_train(&pid(EnvKind::Seafloor, &tmp.path().join("a"))).unwrap();
    let b = cmd_train(&pid(EnvKind::Pipe, &tmp.path().join("b"))).unwrap();
    assert!(cmd_compare(&[a, b], 0.0).is_err());
}

#[test]
fn dpg_and_pid_comparison_reports_both_depth_errors() {
    let tmp = TempDir::new().unwrap();
    let dpg = cmd_train(&small_dpg(9, &tmp.path().join("dpg"))).unwrap();
    let pid_run = cmd_train(&pid(EnvKind::Seafloor, &tmp.path().join("pid"))).unwrap();
    let cmp = cmd_compare(&[dpg, pid_run], 0.0).unwrap();
    assert_eq!(cmp.tracking_label, "mean_abs_dz");
    assert_eq!(cmp.rows[0].algorithm, Algorithm::Dpg);
    assert_eq!(cmp.rows[1].algorithm, Algorithm::Pid);
    for row in &cmp.rows {
        assert!(row.final_tracking.is_finite() && row.final_tracking > 0.0, "{row:?}");
    }
    let table = cmp.table();
    assert!(table.contains("mean_abs_dz") && table.contains("dpg") && table.contains("pid"));
}

#[test]
fn tabular_grid_run_is_fast() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = TrainConfig::new(Algorithm::TabularQ, EnvKind::Grid, 0);
    cfg.output_dir = tmp.path().join("grid");
    let started = Instant::now();
    let dir = cmd_train(&cfg).unwrap();
    assert!(started.elapsed().as_secs_f64() < 10.0);
    assert!(dir.join("q_table.csv").exists());
    let rows = cmd_eval(&dir.join(CHECKPOINT_FILE), &cfg, 1, &tmp.path().join("eval")).unwrap();
    assert_eq!(rows[0].mean_tracking_error, 0.0, "greedy policy must reach the goal");
}

#[test]
fn numeric_blow_up_leaves_a_diagnostics_file() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = small_dpg(10, &tmp.path().join("run"));
    cfg.dpg.reward_scale = 1e300;
    let err = cmd_train(&cfg).unwrap_err();
    assert!(matches!(err, Error::NumericAbort { .. }), "{err}");
    let text = fs::read_to_string(cfg.output_dir.join(DIAGNOSTICS_FILE)).unwrap();
    assert!(!text.trim().is_empty());
}

#[test]
fn terrain_preview_samples_the_mission() {
    let tmp = TempDir::new().unwrap();
    let cfg = pid(EnvKind::Seafloor, tmp.path());
    let out = tmp.path().join("terrain.csv");
    let n = cmd_terrain_preview(&cfg, 0.5, &out).unwrap();
    assert_eq!(n, 201);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "x,seafloor_z,target_z");
    assert_eq!(text.lines().count(), n + 1);
}
