use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reachmac::domain::{Continent, CountryRef, Sex};
use reachmac::groundtruth::{join_pairs, GroundTruthRecord};

fn country(i: usize) -> CountryRef {
    let iso = format!("{}{}", (b'A' + (i / 26) as u8) as char, (b'A' + (i % 26) as u8) as char);
    CountryRef::new(iso.parse().unwrap(), iso, Continent::ALL[i % 6])
}

#[test]
fn join_equals_brute_force_and_ignores_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..100 {
        let universe = rng.random_range(1..60);
        let mut estimates = Vec::new();
        let mut truth = Vec::new();
        for i in 0..universe {
            for sex in Sex::ALL {
                if rng.random_bool(0.7) {
                    estimates.push((country(i), sex, rng.random_range(25.0..40.0)));
                }
                if rng.random_bool(0.6) {
                    truth.push(GroundTruthRecord {
                        country: country(i),
                        sex,
                        mac: rng.random_range(25.0..40.0),
                        period: "2010-2015".into(),
                    });
                }
            }
        }

        let out = join_pairs(&estimates, &truth);
        let mut expected = Vec::new();
        for (c, s, fb) in &estimates {
            for t in &truth {
                if t.country.iso2 == c.iso2 && t.sex == *s {
                    expected.push((c.iso2, *s, *fb, t.mac));
                }
            }
        }
        expected.sort_by_key(|e| (e.0, e.1));
        let got: Vec<_> = out.pairs.iter().map(|p| (p.country.iso2, p.sex, p.mac_fb, p.mac_truth)).collect();
        assert_eq!(got, expected);

        let matched: BTreeSet<_> = expected.iter().map(|e| (e.0, e.1)).collect();
        assert_eq!(out.unmatched_estimates.len(), estimates.len() - matched.len());
        assert_eq!(out.unmatched_truth.len(), truth.len() - matched.len());
        assert!(out.diagnostics.is_empty());

        estimates.shuffle(&mut rng);
        truth.shuffle(&mut rng);
        let again = join_pairs(&estimates, &truth);
        assert_eq!(again.pairs, out.pairs);
        assert_eq!(again.unmatched_estimates, out.unmatched_estimates);
        assert_eq!(again.unmatched_truth, out.unmatched_truth);
    }
}

#[test]
fn latest_period_wins_whatever_the_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let periods = ["1995-2000", "2000-2005", "2005-2010", "2010-2015"];
    for _ in 0..50 {
        let mut truth: Vec<GroundTruthRecord> = periods
            .iter()
            .enumerate()
            .map(|(k, p)| GroundTruthRecord { country: country(3), sex: Sex::Female, mac: 28.0 + k as f64, period: (*p).into() })
            .collect();
        truth.shuffle(&mut rng);
        let out = join_pairs(&[(country(3), Sex::Female, 30.0)], &truth);
        assert_eq!(out.pairs.len(), 1);
        assert_eq!(out.pairs[0].mac_truth, 31.0);
        assert_eq!(out.diagnostics.len(), 3);
        assert!(out.diagnostics.iter().all(|d| d.message.contains("JoinAmbiguity")));
    }
}
