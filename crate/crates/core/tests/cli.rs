use std::fs;
use std::path::Path;
use std::process::Command;

use animat_swarm::runner::{
    cli_analyze, cli_evolve, cli_sweep, cli_trial, replicate_dir, AnalyzeMode, AnalyzeOptions, ExperimentConfig,
    RunnerError,
};
use animat_swarm::{Condition, Environment, Genome};

fn small(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::parse(
        "population_size = 4\ntournament_size = 2\ngenerations = 4\ncheckpoint_interval = 2\n\
         steps = 100\ntimeout = 10\ntrials = 2\nreplicates = 2\ncondition = G_0.25\nseed = 11\n",
    )
    .unwrap();
    cfg.output = out.to_path_buf();
    cfg
}

fn stats(run: &Path, r: usize) -> String {
    fs::read_to_string(replicate_dir(run, r).join("stats.csv")).unwrap()
}

#[test]
fn zero_generations_writes_snapshot_and_first_row() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&tmp.path().join("run"));
    cfg.ga.generations = 0;
    cfg.replicates = 1;
    cli_evolve(&cfg).unwrap();
    let snap = fs::read_to_string(cfg.output.join("config.txt")).unwrap();
    assert!(snap.starts_with("# animat-swarm "));
    assert!(snap.contains("seed = 11\n"));
    let text = stats(&cfg.output, 0);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# animat-swarm ") && lines[0].contains("seed="));
    assert_eq!(lines[1], "generation,mean_fitness,max_fitness,sem,mean_genome_length,mean_gates");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("0,"));
    // the snapshot alone reproduces the run
    let again = ExperimentConfig::load(&cfg.output.join("config.txt")).unwrap();
    assert!(again.differences(&cfg).is_empty());
}

#[test]
fn same_seed_same_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let a = small(&tmp.path().join("a"));
    let b = small(&tmp.path().join("b"));
    cli_evolve(&a).unwrap();
    cli_evolve(&b).unwrap();
    for r in 0..2 {
        assert_eq!(stats(&a.output, r), stats(&b.output, r));
    }
    assert_ne!(stats(&a.output, 0), stats(&a.output, 1));
}

#[test]
fn interrupted_run_resumes_to_the_same_result() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small(&tmp.path().join("run"));
    cli_evolve(&cfg).unwrap();
    let full = stats(&cfg.output, 1);
    let final_pop = fs::read(replicate_dir(&cfg.output, 1).join("final_population.hex")).unwrap();
    let rep = replicate_dir(&cfg.output, 1);
    for f in ["final_population.hex", "final_fitness.csv", "checkpoint_000004.hex"] {
        fs::remove_file(rep.join(f)).unwrap();
    }
    let summary = cli_evolve(&cfg).unwrap();
    assert_eq!(summary[0].started_at, None);
    assert_eq!(summary[1].started_at, Some(2));
    assert_eq!(stats(&cfg.output, 1), full);
    assert_eq!(fs::read(rep.join("final_population.hex")).unwrap(), final_pop);
}

#[test]
fn resume_with_other_config_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&tmp.path().join("run"));
    cfg.ga.generations = 0;
    cli_evolve(&cfg).unwrap();
    cfg.ga.trial.penalty = 0.5;
    match cli_evolve(&cfg) {
        Err(RunnerError::SnapshotMismatch { keys, .. }) => assert_eq!(keys, vec!["penalty".to_string()]),
        other => panic!("expected mismatch, got {other:?}"),
    }
}

fn write_zero_genome(path: &Path) {
    let mut f = fs::File::create(path).unwrap();
    Genome::from_sites(vec![0; 2000]).write_binary(&mut f).unwrap();
}

#[test]
fn full_condition_places_all_72() {
    let tmp = tempfile::tempdir().unwrap();
    let genome = tmp.path().join("zero.bin");
    write_zero_genome(&genome);
    let mut cfg = ExperimentConfig { condition: Condition::Full, ..Default::default() };
    cfg.ga.trial.steps = 5;
    cfg.ga.trial.timeout = 1;
    let log = cli_trial(&genome, 0, &cfg, 0, &tmp.path().join("t.csv")).unwrap();
    assert_eq!(log.swarm_size, 72);
    let mut cells: Vec<(usize, usize)> = (0..72).map(|a| (log.row(0, a).pose.y, log.row(0, a).pose.x)).collect();
    cells.sort();
    let mut starts: Vec<(usize, usize)> = Environment::default().starts().iter().map(|&(x, y)| (y, x)).collect();
    starts.sort();
    assert_eq!(cells, starts);
}

#[test]
fn sweep_of_zero_gate_genome() {
    let tmp = tempfile::tempdir().unwrap();
    let genome = tmp.path().join("zero.bin");
    write_zero_genome(&genome);
    let mut cfg = ExperimentConfig::default();
    cfg.ga.trial.steps = 50;
    cfg.ga.trial.timeout = 10;
    let out_a = tmp.path().join("a.csv");
    let out_b = tmp.path().join("b.csv");
    let res = cli_sweep(&genome, 0, &cfg, &out_a).unwrap();
    cli_sweep(&genome, 0, &cfg, &out_b).unwrap();
    let text = fs::read_to_string(&out_a).unwrap();
    assert_eq!(text, fs::read_to_string(&out_b).unwrap());
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 21);
    let sizes: Vec<&str> = rows.iter().map(|r| r.split(',').nth(1).unwrap()).collect();
    assert_eq!(sizes.join(","), "72,68,65,61,58,54,50,47,43,40,36,32,29,25,22,18,14,11,7,4,1");
    assert!(rows.iter().all(|r| r.ends_with(",0")));
    assert!(text.trim_end().ends_with("# auc=0"));
    assert_eq!(res.auc, 0.0);
}

#[test]
fn corrupt_genome_reports_offset() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.bin");
    // declares 3000 sites, holds 10
    let mut bytes = 3000u64.to_le_bytes().to_vec();
    bytes.extend([1u8; 10]);
    fs::write(&path, bytes).unwrap();
    let err = cli_sweep(&path, 0, &ExperimentConfig::default(), &tmp.path().join("s.csv")).unwrap_err();
    assert!(err.to_string().contains("offset 18"), "{err}");
    let hex = tmp.path().join("bad.hex");
    fs::write(&hex, "00ff\n0g\n").unwrap();
    let err = cli_sweep(&hex, 0, &ExperimentConfig::default(), &tmp.path().join("s.csv")).unwrap_err();
    assert!(err.to_string().contains("offset 6"), "{err}");
}

#[test]
fn analyze_modes() {
    let tmp = tempfile::tempdir().unwrap();
    let a = small(&tmp.path().join("quarter"));
    let mut b = small(&tmp.path().join("single"));
    b.condition = Condition::Single;
    cli_evolve(&a).unwrap();
    cli_evolve(&b).unwrap();
    let runs = vec![a.output.clone(), b.output.clone()];
    let out = tmp.path().join("out");
    let opts = AnalyzeOptions::default();

    let files = cli_analyze(&runs, AnalyzeMode::Heatmap, &out, &opts).unwrap();
    let heat = fs::read_to_string(&files[0]).unwrap();
    let total: u64 = heat
        .lines()
        .skip(2)
        .flat_map(|l| l.split(',').skip(1).map(|c| c.parse::<u64>().unwrap()).collect::<Vec<_>>())
        .sum();
    // two replicates, one 100-step trial each at 18 animats
    assert_eq!(total, 2 * 18 * 100);

    let files = cli_analyze(&runs, AnalyzeMode::Graph, &out, &opts).unwrap();
    let graph = fs::read_to_string(&files[0]).unwrap();
    for row in graph.lines().skip(2) {
        let lscc: usize = row.split(',').nth(4).unwrap().parse().unwrap();
        assert!((1..=6).contains(&lscc), "{row}");
    }
    assert_eq!(graph.lines().count(), 2 + 2 * 2 * 4);

    let files = cli_analyze(&runs, AnalyzeMode::Stats, &out, &opts).unwrap();
    let table = fs::read_to_string(&files[0]).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].contains("kruskal_wallis_h="));
    assert_eq!(lines[1], "group,measure,G_0.25");
    assert!(lines[2].starts_with("G_single,p,"));
    assert!(lines[3].starts_with("G_single,U,"));

    let files = cli_analyze(&runs, AnalyzeMode::States, &out, &opts).unwrap();
    let states = fs::read_to_string(&files[0]).unwrap();
    assert_eq!(states.lines().count(), 2 + 2 * 9);
    let files = cli_analyze(&runs, AnalyzeMode::Tpm, &out, &opts).unwrap();
    assert_eq!(fs::read_to_string(&files[0]).unwrap().lines().count(), 2 + 2 * 81);
}

#[test]
fn analyze_lists_missing_files() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small(&tmp.path().join("run"));
    cfg.ga.generations = 0;
    cli_evolve(&cfg).unwrap();
    fs::remove_file(replicate_dir(&cfg.output, 1).join("final_fitness.csv")).unwrap();
    let err = cli_analyze(&[cfg.output.clone()], AnalyzeMode::Graph, &tmp.path().join("o"), &AnalyzeOptions::default())
        .unwrap_err();
    assert!(err.to_string().contains("replicate_01/final_fitness.csv"), "{err}");
    let err = cli_analyze(&[tmp.path().join("nothing")], AnalyzeMode::Graph, &tmp.path().join("o"), &AnalyzeOptions::default())
        .unwrap_err();
    assert!(err.to_string().contains("config.txt"), "{err}");
}

#[test]
fn binary_rejects_unknown_key() {
    let out = Command::new(env!("CARGO_BIN_EXE_animat-swarm"))
        .args(["evolve", "--set", "generatons=3"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("generatons"));
}

#[test]
fn binary_trial_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let genome = tmp.path().join("zero.bin");
    write_zero_genome(&genome);
    let log = tmp.path().join("log.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_animat-swarm"))
        .args(["trial", "--genome"])
        .arg(&genome)
        .args(["--set", "condition=G_0.25", "--set", "steps=20", "--set", "timeout=5", "--out"])
        .arg(&log)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().count(), 2 + 18 * 20);
    let out = tmp.path().join("heat");
    let status = Command::new(env!("CARGO_BIN_EXE_animat-swarm"))
        .args(["analyze", "--mode", "heatmap", "--log"])
        .arg(&log)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let heat = fs::read_to_string(out.join("heatmap_logs.csv")).unwrap();
    let total: u64 = heat.lines().skip(2).flat_map(|l| l.split(',').skip(1).map(|c| c.parse::<u64>().unwrap()).collect::<Vec<_>>()).sum();
    assert_eq!(total, 18 * 20);
}
