use crs_core::kernel::{Equalizers, MseWeights};
use crs_core::kv::KvDocument;
use crs_core::subproblem::{SolveStatus, SubproblemSpec};
use crs_core::Scenario;

const FIXTURE: &str = include_str!("fixtures/subproblem_reference.txt");

struct Case {
    name: String,
    scenario: Scenario,
    theta: f64,
    u: [f64; 2],
    g: Equalizers,
    w: MseWeights,
    r_relay: f64,
    objective: f64,
}

fn pair<T: Copy>(v: Vec<T>) -> [T; 2] {
    assert_eq!(v.len(), 2);
    [v[0], v[1]]
}

fn parse_cases() -> Vec<Case> {
    let mut cases = Vec::new();
    for block in FIXTURE.split("\n\n") {
        let mut lines = block
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let Some(header) = lines.next() else { continue };
        let name = header.trim_matches(|c| c == '[' || c == ']').to_string();
        let body: Vec<&str> = lines.collect();
        let doc = KvDocument::parse(&body.join("\n")).unwrap();
        let get = |k: &str| doc.require(k).unwrap();
        let h3 = get("h3").as_complex_list().unwrap()[0];
        let p_t = get("p_t").as_f64().unwrap();
        let mut scenario = Scenario::new(
            get("h1").as_complex_list().unwrap(),
            get("h2").as_complex_list().unwrap(),
            h3,
            p_t,
            p_t,
            pair(get("r_tar").as_f64_list().unwrap()),
        )
        .unwrap();
        scenario.sigma_sq = pair(get("sigma_sq").as_f64_list().unwrap());
        cases.push(Case {
            name,
            scenario,
            theta: get("theta").as_f64().unwrap(),
            u: pair(get("u").as_f64_list().unwrap()),
            g: Equalizers {
                common: pair(get("g_common").as_complex_list().unwrap()),
                private: pair(get("g_private").as_complex_list().unwrap()),
            },
            w: MseWeights {
                common: pair(get("w_common").as_f64_list().unwrap()),
                private: pair(get("w_private").as_f64_list().unwrap()),
            },
            r_relay: get("r_relay").as_f64().unwrap(),
            objective: get("objective").as_f64().unwrap(),
        });
    }
    cases
}

#[test]
fn matches_independent_reference_objectives() {
    let cases = parse_cases();
    assert_eq!(cases.len(), 30);
    for case in &cases {
        let mut spec = SubproblemSpec::new(&case.scenario, case.theta, case.u, case.g, case.w);
        spec.r_relay = case.r_relay;
        let sol = spec.solve().unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal, "{}", case.name);
        let err = (sol.objective - case.objective).abs();
        assert!(
            err <= 1e-4 * (1.0 + sol.objective.abs()),
            "{}: {} vs reference {}",
            case.name,
            sol.objective,
            case.objective
        );
        assert!(spec.max_violation(&sol) <= 1e-7, "{}", case.name);
        assert!(spec.kkt_residual(&sol) <= 1e-6, "{}", case.name);
    }
}
