use chrono::{TimeZone, Utc};
use reachmac::domain::{age_grid, AudienceCell, AudienceSnapshot, Continent, CountryRef, ParentFilter, Sex};
use reachmac::groundtruth::GroundTruthRecord;
use reachmac::indicators::{IneligibilityReason, MacEstimate};
use reachmac::ingest::table::{read_snapshot, write_snapshot};
use reachmac::predict::{choropleth, predict_missing};
use reachmac::stats::CalibrationModel;

fn country(iso: &str, continent: Continent) -> CountryRef {
    CountryRef::new(iso.parse().unwrap(), iso, continent)
}

#[test]
fn snapshot_table_round_trip() {
    let at = Utc.with_ymd_and_hms(2018, 1, 2, 12, 0, 0).unwrap();
    let ke = country("KE", Continent::Africa);
    let mut cells = Vec::new();
    for sex in Sex::ALL {
        for (i, g) in age_grid().into_iter().enumerate() {
            cells.push(AudienceCell::new(ke.clone(), sex, g, ParentFilter::All, 100_000 + i as u64, at));
            cells.push(AudienceCell::new(ke.clone(), sex, g, ParentFilter::ParentOfChild0To12m, 20, at));
        }
    }
    cells.reverse();
    let (snap, dups) = AudienceSnapshot::assemble(ke.clone(), cells, at);
    assert_eq!(dups, 0);
    let text = write_snapshot(&snap);
    let back = read_snapshot(text.as_bytes(), "mem", &ke).unwrap();
    assert_eq!(back, snap);
    assert!(back.cells.iter().filter(|c| c.count == 20).all(|c| c.at_lower_bound));
    assert_eq!(write_snapshot(&back), text);
}

#[test]
fn prediction_set_and_map_round_trip() {
    let model = CalibrationModel::from_summary(7.451, 0.811, 1.936, 0.063, 0.949, 81).unwrap();
    let mk = |iso: &str, mac: f64, eligible: bool| MacEstimate {
        country: country(iso, Continent::Asia),
        sex: Sex::Male,
        mac: Some(mac),
        eligible,
        reason: (!eligible).then_some(IneligibilityReason::LowerBoundCell),
    };
    let estimates = vec![mk("IN", 30.0, true), mk("JP", 34.0, true), mk("NP", 29.0, false), mk("TH", 31.0, true)];
    let truth = vec![GroundTruthRecord { country: country("JP", Continent::Asia), sex: Sex::Male, mac: 35.1, period: "2015".into() }];
    let preds = predict_missing(&model, Sex::Male, &estimates, &truth).unwrap();
    let got: Vec<&str> = preds.iter().map(|p| p.country.iso2.as_str()).collect();
    assert_eq!(got, ["IN", "TH"]);

    let doc = choropleth(&preds, &truth, Some(&serde_json::json!({"seed": 1}))).unwrap();
    let text = serde_json::to_string(&doc).unwrap();
    let back: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(back, doc);
    let features = back["features"].as_array().unwrap();
    assert_eq!(features.len(), 3);
    assert_eq!(features[0]["id"], "IN-male");
    assert_eq!(features[0]["properties"]["mac_predicted"].as_f64().unwrap(), preds[0].mac_predicted);
    assert_eq!(features[2]["properties"]["source"], "ground_truth");
    assert_eq!(back["metadata"]["seed"], 1);
}
