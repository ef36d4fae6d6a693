mod common;

use std::sync::Arc;

use common::*;
use semaxes_core::probe::stub::{LinearStub, StubServer, TableStub};
use semaxes_core::probe::wire::ScoreRequest;
use semaxes_core::probe::{
    probe_feature, run_offtarget_experiment, score_pair, ExperimentOptions, HttpLogitsClient, ProbePrompt,
};
use semaxes_core::*;

fn words(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("w{i}")).collect()
}

#[test]
fn probe_mean_matches_spreadsheet() {
    // per-prompt logprobs for a 3-pair feature, written out by hand
    let rows = [
        ("good", "bad", 3f64.ln(), 0.0),
        ("bad", "good", -2.0, -0.5),
        ("nice", "awful", -1.0, -1.0),
        ("awful", "nice", 0.2, -0.7),
        ("great", "terrible", -0.1, -4.0),
        ("terrible", "great", -3.0, 0.0),
    ];
    let mut stub = TableStub::new();
    for (a, b, la, lb) in rows {
        stub = stub.with(a, b, la, lb);
    }
    let f = FeatureSpec::new(
        "good",
        vec![AntonymPair::new("good", "bad"), AntonymPair::new("nice", "awful"), AntonymPair::new("great", "terrible")],
    );
    let share = |a: f64, b: f64| a.exp() / (a.exp() + b.exp());
    let expected = (share(3f64.ln(), 0.0)
        + share(-0.5, -2.0)
        + share(-1.0, -1.0)
        + share(-0.7, 0.2)
        + share(-0.1, -4.0)
        + share(0.0, -3.0))
        / 6.0;
    let r = probe_feature(&stub, "peace", &f, &[]).unwrap();
    assert_eq!(r.n_prompts, 6);
    assert!((r.p_norm_positive - expected).abs() < 1e-12);
    assert!((r.per_prompt[0].p_first - 0.75).abs() < 1e-12);
    assert!((r.per_prompt[0].p_second - 0.25).abs() < 1e-12);
}

#[test]
fn score_pair_over_http() {
    let stub = TableStub::new().with("kind", "cruel", 3f64.ln(), 1f64.ln()).with("a", "b", -0.3, -0.3).with("c", "d", 0.0, -1e9);
    let server = StubServer::spawn(Arc::new(stub)).unwrap();
    let client = HttpLogitsClient::new(&server.url());
    let (p, q) = score_pair(&client, &ProbePrompt::new("winter", "kind", "cruel", true), &[]).unwrap();
    assert!((p - 0.75).abs() < 1e-12 && (q - 0.25).abs() < 1e-12);
    assert_eq!(score_pair(&client, &ProbePrompt::new("x", "a", "b", true), &[]).unwrap(), (0.5, 0.5));
    let (p, q) = score_pair(&client, &ProbePrompt::new("x", "c", "d", true), &[]).unwrap();
    assert!((p - 1.0).abs() < 1e-12 && q.abs() < 1e-12);
}

#[test]
fn planted_cosines_are_recovered() {
    let p = planted_space(21);
    let stub = LinearStub::new(p.space.clone(), &p.lexicon, p.planted.clone(), 2.0).unwrap();
    let opts = ExperimentOptions { scale_c: 0.35, max_in_flight: 8 };
    let exp = run_offtarget_experiment(&p.space, &p.lexicon, &words(40), &stub, &opts).unwrap();
    assert_eq!(exp.records.len(), 8 * 7);
    assert!(exp.failures.is_empty());
    let fit = exp.fit_signed.unwrap();
    assert!(fit.pearson.unwrap() >= 0.95, "r = {:?}", fit.pearson);
    assert!(fit.slope > 0.0);
    // each push moves its own feature more than any other
    for on in &exp.on_target {
        let max_off = exp
            .records
            .iter()
            .filter(|r| r.target_feature == on.target_feature)
            .map(|r| r.mean_signed_effect)
            .fold(f64::MIN, f64::max);
        assert!(on.mean_signed_effect > max_off);
    }
}

#[test]
fn zero_scale_gives_zero_effects() {
    let p = planted_space(22);
    let stub = LinearStub::new(p.space.clone(), &p.lexicon, p.planted.clone(), 2.0).unwrap();
    let opts = ExperimentOptions { scale_c: 0.0, max_in_flight: 2 };
    let exp = run_offtarget_experiment(&p.space, &p.lexicon, &words(5), &stub, &opts).unwrap();
    assert!(exp.records.iter().chain(&exp.on_target).all(|r| r.mean_signed_effect == 0.0 && r.mean_abs_effect == 0.0));
}

#[test]
fn experiment_is_bit_reproducible() {
    let p = planted_space(23);
    let stub = LinearStub::new(p.space.clone(), &p.lexicon, p.planted.clone(), 1.5).unwrap();
    let run = |threads| {
        let opts = ExperimentOptions { scale_c: 0.35, max_in_flight: threads };
        serde_json::to_string(&run_offtarget_experiment(&p.space, &p.lexicon, &words(10), &stub, &opts).unwrap()).unwrap()
    };
    let a = run(1);
    assert_eq!(a, run(1));
    assert_eq!(a, run(6));
}

#[test]
fn missing_override_support_fails_before_probing() {
    let p = planted_space(24);
    let stub = LinearStub::new(p.space.clone(), &p.lexicon, p.planted.clone(), 1.0).unwrap().without_overrides();
    let err = run_offtarget_experiment(&p.space, &p.lexicon, &words(3), &stub, &ExperimentOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Capability(_)));
    assert_eq!(stub.calls(), 1);
}

#[test]
fn http_experiment_matches_in_process_and_reuses_prompts() {
    let p = planted_space(25);
    let stub = Arc::new(LinearStub::new(p.space.clone(), &p.lexicon, p.planted.clone(), 2.0).unwrap());
    let server = StubServer::spawn(stub.clone()).unwrap();
    let client = HttpLogitsClient::new(&server.url());
    let lex = FeatureLexicon::new(p.lexicon.features()[..3].to_vec()).unwrap();
    let opts = ExperimentOptions { scale_c: 0.35, max_in_flight: 4 };
    let over_http = run_offtarget_experiment(&p.space, &lex, &words(3), &client, &opts).unwrap();
    let local = run_offtarget_experiment(&p.space, &lex, &words(3), stub.as_ref(), &opts).unwrap();
    assert_eq!(over_http.records, local.records);

    let bodies: Vec<ScoreRequest> = server.request_bodies().iter().map(|b| serde_json::from_str(b).unwrap()).collect();
    let plain: Vec<&ScoreRequest> = bodies.iter().filter(|r| r.embedding_overrides.is_empty()).collect();
    let steered: Vec<&ScoreRequest> = bodies.iter().filter(|r| !r.embedding_overrides.is_empty()).collect();
    assert!(!plain.is_empty() && !steered.is_empty());
    for s in &steered {
        assert!(plain.iter().any(|b| b.messages == s.messages && b.prefill == s.prefill && b.candidates == s.candidates));
        assert_eq!(s.embedding_overrides.len(), 1);
        assert!(p.space.vocab().id(&s.embedding_overrides[0].token).is_some());
    }
}

#[test]
fn capability_over_http() {
    let p = planted_space(26);
    let stub = Arc::new(LinearStub::new(p.space.clone(), &p.lexicon, p.planted.clone(), 1.0).unwrap().without_overrides());
    let server = StubServer::spawn(stub).unwrap();
    let client = HttpLogitsClient::new(&server.url());
    let err = run_offtarget_experiment(&p.space, &p.lexicon, &words(2), &client, &ExperimentOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Capability(_)), "{err}");
    assert_eq!(server.request_bodies().len(), 1);
}
