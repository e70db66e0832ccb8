use std::collections::BTreeSet;

use mixpred_lab::config::MethodName;
use mixpred_lab::{find, registry, run, validate, ExperimentConfig, LabError};

#[test]
fn registry_is_large_with_unique_ids_and_anchors() {
    let reg = registry();
    assert!(reg.len() >= 14);
    let ids: BTreeSet<_> = reg.iter().map(|e| e.id).collect();
    assert_eq!(ids.len(), reg.len());
    for e in reg {
        assert!(!e.summary.is_empty(), "{}", e.id);
        let (kind, label) = e.anchor.split_once(':').unwrap_or_else(|| panic!("{}: bad anchor", e.id));
        assert!(!kind.is_empty() && !label.is_empty(), "{}", e.id);
    }
}

#[test]
fn every_template_parses_and_validates() {
    for e in registry() {
        let cfg = ExperimentConfig::parse(e.template).unwrap_or_else(|err| panic!("{}: {err}", e.id));
        assert_eq!(cfg.experiment.id, e.id);
        validate(&cfg).unwrap_or_else(|err| panic!("{}: {err}", e.id));
        if e.stochastic {
            assert!(cfg.experiment.seed.is_some(), "{} template lacks a seed", e.id);
        }
        // Every param in the template is one the experiment declares.
        for k in cfg.params.keys() {
            assert!(e.params.contains(&k.as_str()), "{}: {k}", e.id);
        }
    }
}

#[test]
fn id_only_configs_run_for_deterministic_experiments() {
    for id in ["nml-negative", "disc-adversarial", "weights-matter", "lb"] {
        let r = run(&ExperimentConfig::for_id(id)).unwrap();
        assert!(r.pass(), "{id}");
    }
}

#[test]
fn unknown_fields_and_keys_are_errors() {
    let e = ExperimentConfig::parse("[experiment]\nid = \"lb\"\ncolour = 1\n").unwrap_err();
    assert!(matches!(e, LabError::Config(_)));
    assert!(ExperimentConfig::parse("[experiment]\nid = \"lb\"\n[extra]\nx = 1\n").is_err());

    let cfg = ExperimentConfig::parse("[experiment]\nid = \"lb\"\n[params]\nbogus = 3\n").unwrap();
    let e = validate(&cfg).unwrap_err();
    assert!(e.to_string().contains("bogus"), "{e}");

    let cfg = ExperimentConfig::parse("[experiment]\nid = \"lb\"\n[measures]\nzeta = \"kt{2}\"\n").unwrap();
    assert!(validate(&cfg).is_err());
}

#[test]
fn unknown_experiment_is_an_error() {
    assert!(matches!(find("nope"), Err(LabError::UnknownExperiment(_))));
    assert!(matches!(run(&ExperimentConfig::for_id("nope")), Err(LabError::UnknownExperiment(_))));
}

#[test]
fn stochastic_runs_need_a_seed() {
    let e = run(&ExperimentConfig::for_id("pinsker-sweep")).unwrap_err();
    assert!(matches!(e, LabError::MissingSeed(_)));
    let mut cfg = ExperimentConfig::for_id("nml-bound");
    cfg.experiment.method = Some(MethodName::MonteCarlo);
    assert!(matches!(validate(&cfg), Err(LabError::MissingSeed(_))));
}

#[test]
fn unknown_family_in_measures_fails_validation() {
    let cfg = ExperimentConfig::parse(
        "[experiment]\nid = \"loss-series\"\nseed = 1\n[measures]\nmu = \"gaussian{0}\"\n",
    )
    .unwrap();
    assert!(matches!(validate(&cfg), Err(LabError::Spec { .. })));
}

#[test]
fn cell_cap_stops_oversized_enumeration() {
    let cfg = ExperimentConfig::parse(
        "[experiment]\nid = \"lb\"\n[params]\nn = 30\n[caps]\ncells = 1000\n",
    )
    .unwrap();
    let e = run(&cfg).unwrap_err();
    assert!(matches!(e, LabError::Cap { cap: "cells", .. }), "{e}");
}

#[test]
fn echo_config_reproduces_the_run() {
    let cfg = ExperimentConfig::parse(find("loss-series").unwrap().template).unwrap();
    let a = run(&cfg).unwrap();
    assert_eq!(a.config.params["n"].as_integer(), Some(256));
    let again = ExperimentConfig::parse(&a.config.to_toml()).unwrap();
    let b = run(&again).unwrap();
    assert_eq!(a.tables, b.tables);
    assert_eq!(b.config, a.config);
}

#[test]
fn nml_negative_emits_log_three_quarters() {
    let r = run(&ExperimentConfig::for_id("nml-negative")).unwrap();
    let c = &r.verdicts[0];
    assert!((c.lhs - 0.75f64.log2()).abs() <= 1e-12);
    assert!(r.pass());
}
