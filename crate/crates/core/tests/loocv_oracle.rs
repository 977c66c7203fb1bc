use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reachmac::domain::{Continent, CountryRef, Sex};
use reachmac::groundtruth::ValidationPair;
use reachmac::stats::{loocv, LoocvScope};
use reachmac_oracles::exact_ols;

fn dataset(rng: &mut ChaCha8Rng, n: usize) -> Vec<ValidationPair> {
    (0..n)
        .map(|i| {
            let iso = format!("{}{}", (b'A' + (i / 26) as u8) as char, (b'A' + (i % 26) as u8) as char);
            let continent = Continent::ALL[rng.random_range(0..Continent::ALL.len())];
            let x = rng.random_range(27.0..38.0);
            ValidationPair {
                country: CountryRef::new(iso.parse().unwrap(), iso, continent),
                sex: Sex::Male,
                mac_fb: x,
                mac_truth: 7.451 + 0.811 * x + rng.random_range(-1.6..1.6),
            }
        })
        .collect()
}

fn refit_prediction(pairs: &[&ValidationPair], held_out: usize) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) = pairs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != held_out)
        .map(|(_, p)| (p.mac_fb, p.mac_truth))
        .unzip();
    let fit = exact_ols(&x, &y);
    fit.intercept + fit.slope * pairs[held_out].mac_fb
}

#[test]
fn global_folds_match_refits() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let n = rng.random_range(4..=60);
        let pairs = dataset(&mut rng, n);
        let res = loocv(&pairs, LoocvScope::Global).unwrap();
        let all: Vec<&ValidationPair> = pairs.iter().collect();
        assert_eq!(res.predictions.len(), n);
        for (i, p) in pairs.iter().enumerate() {
            let want = refit_prediction(&all, i);
            let got = res.predictions[&p.country.iso2];
            assert!((got - want).abs() <= 1e-10 * want.abs(), "{got} vs {want}");
        }
        let parts: usize = res.grouped.per_continent.values().map(|r| r.n).sum();
        assert_eq!(parts, res.grouped.overall.n);
        assert_eq!(res.grouped.overall.n, n);
    }
}

#[test]
fn continent_folds_match_refits() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..50 {
        let n = rng.random_range(4..=60);
        let pairs = dataset(&mut rng, n);
        let res = loocv(&pairs, LoocvScope::Continent).unwrap();
        let mut expected = 0;
        for c in Continent::ALL {
            let group: Vec<&ValidationPair> = pairs.iter().filter(|p| p.country.continent == c).collect();
            if group.len() < 4 {
                assert!(group.iter().all(|p| !res.predictions.contains_key(&p.country.iso2)));
                continue;
            }
            expected += group.len();
            for (i, p) in group.iter().enumerate() {
                let want = refit_prediction(&group, i);
                let got = res.predictions[&p.country.iso2];
                assert!((got - want).abs() <= 1e-10 * want.abs());
            }
        }
        assert_eq!(res.predictions.len(), expected);
        let parts: usize = res.grouped.per_continent.values().map(|r| r.n).sum();
        assert_eq!(parts, res.grouped.overall.n);
        assert_eq!(res.grouped.overall.n, expected);
    }
}
