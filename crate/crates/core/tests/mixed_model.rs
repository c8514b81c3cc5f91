use multistratum::dataset::ChipDataset;
use multistratum::mixed::{
    detect_estimability, fitted_means_and_lsd, reml_fit, simulate_response, MeansTerm, MixedModelSpec, RemlOptions,
    SimulationParams,
};
use multistratum::scenario::Scenario;

fn paper_data(seed: u64, missing: usize) -> ChipDataset {
    let s = Scenario::preset("paper").unwrap();
    simulate_response(
        &s.table,
        &SimulationParams {
            seed,
            missing,
            ..SimulationParams::microplate()
        },
    )
    .unwrap()
}

#[test]
fn estimability_pattern_of_the_microplate_model() {
    let flags = detect_estimability(&MixedModelSpec::microplate(), &paper_data(1, 17)).unwrap();
    let pattern: Vec<(&str, bool)> = flags.iter().map(|f| (f.name.as_str(), f.estimable)).collect();
    assert_eq!(
        pattern,
        [
            ("week", false),
            ("plate", false),
            ("tube", true),
            ("column", true),
            ("row", true)
        ]
    );
}

#[test]
fn dropping_plate_terms_makes_components_estimable() {
    let spec = MixedModelSpec::microplate().without(&["g", "h", "gh"]);
    let flags = detect_estimability(&spec, &paper_data(1, 0)).unwrap();
    assert!(flags.iter().all(|f| f.estimable), "{flags:?}");
}

#[test]
fn fit_survives_missing_chips_and_csv_round_trip() {
    let data = paper_data(3, 17);
    let back = ChipDataset::from_csv(&data.to_csv()).unwrap();
    assert_eq!(back.missing_count(), 17);
    let fit = reml_fit(&MixedModelSpec::microplate(), &back, &RemlOptions::default()).unwrap();
    assert_eq!(fit.n_obs, 239);
    assert!(fit.component("residual").unwrap().estimate.unwrap() > 50.0);
    for t in ["g", "h", "gh"] {
        assert!(!fit.is_testable(t));
    }
    let a = fit.test("a").unwrap();
    assert!(a.testable && a.den_df.unwrap() > 0.0);
    let history = &fit.reml.history;
    assert!(
        history.windows(2).all(|w| w[1] >= w[0] - 1e-9),
        "REML criterion decreased"
    );
}

#[test]
fn means_tables_have_expected_levels() {
    let data = paper_data(5, 0);
    let fit = reml_fit(&MixedModelSpec::microplate(), &data, &RemlOptions::default()).unwrap();
    let rows = fitted_means_and_lsd(&fit, &MeansTerm::parse("row").unwrap(), 0.1).unwrap();
    assert_eq!(rows.levels.len(), 8);
    assert!(rows.lsd.is_some());
    let ah = fitted_means_and_lsd(&fit, &MeansTerm::parse("ah").unwrap(), 0.1).unwrap();
    assert_eq!(ah.levels.len(), 4);
    assert!(ah.lsd.is_some());
    let gh = fitted_means_and_lsd(&fit, &MeansTerm::parse("gh").unwrap(), 0.1).unwrap();
    assert!(gh.lsd.is_none());
    // balanced complete data: the four ah means average to the intercept
    let avg: f64 = ah.levels.iter().map(|l| l.mean).sum::<f64>() / 4.0;
    assert!((avg - fit.coefficient("(Intercept)").unwrap().estimate).abs() < 1e-8);
}
