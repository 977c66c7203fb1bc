use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reachmac::domain::{age_grid, AudienceCell, AudienceSnapshot, Continent, CountryRef, FertilitySchedule, ParentFilter, Sex};
use reachmac::indicators::{estimate_country, mac, schedule_from_snapshot, LowerBoundPolicy};
use reachmac_oracles::exact_weighted_mean;

const MIDPOINTS: [f64; 7] = [17.5, 22.5, 27.5, 32.5, 37.5, 42.5, 47.5];

fn country() -> CountryRef {
    CountryRef::new("PT".parse().unwrap(), "Portugal", Continent::Europe)
}

fn schedule(rates: &[f64]) -> FertilitySchedule {
    FertilitySchedule::new(country(), Sex::Female, rates).unwrap()
}

fn random_rates(rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let r: Vec<f64> = (0..7)
            .map(|_| if rng.random_bool(0.15) { 0.0 } else { rng.random_range(0.0..0.3) })
            .collect();
        if r.iter().any(|v| *v > 0.0) {
            return r;
        }
    }
}

#[test]
fn ten_thousand_schedules() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10_000 {
        let rates = random_rates(&mut rng);
        let m = mac(&schedule(&rates)).unwrap();
        assert!((17.5..=47.5).contains(&m));

        let want = exact_weighted_mean(&MIDPOINTS, &rates);
        assert!((m - want).abs() <= 1e-12 * want, "{m} vs {want}");

        let c = rng.random_range(1e-3..1e3);
        let scaled: Vec<f64> = rates.iter().map(|r| r * c).collect();
        let ms = mac(&schedule(&scaled)).unwrap();
        assert!((ms - m).abs() <= 1e-12 * m, "scale {c}: {ms} vs {m}");

        // moving mass to an older group never lowers the mean
        let i = rng.random_range(0..6);
        let j = rng.random_range(i + 1..7);
        let mut shifted = rates.clone();
        let delta = shifted[i] * rng.random_range(0.0..=1.0);
        shifted[i] -= delta;
        shifted[j] += delta;
        let mj = mac(&schedule(&shifted)).unwrap();
        assert!(mj >= m - 1e-12 * m, "shift {i}->{j}: {mj} < {m}");
    }
}

#[test]
fn uniform_schedule_is_exactly_central() {
    for r in [1e-9, 0.01, 0.123, 0.5, 1.0, 3.0] {
        assert_eq!(mac(&schedule(&[r; 7])).unwrap(), 32.5);
    }
}

#[test]
fn snapshot_pipeline_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let at = Utc.with_ymd_and_hms(2018, 1, 2, 0, 0, 0).unwrap();
    let mut excluded = 0;
    for _ in 0..1000 {
        let mut cells = Vec::new();
        let mut counts = [[(0u64, 0u64); 7]; 2];
        for (s, sex) in Sex::ALL.into_iter().enumerate() {
            for (g, group) in age_grid().into_iter().enumerate() {
                let total = if rng.random_bool(0.02) { 20 } else { rng.random_range(1000..5_000_000u64) };
                let parents = if rng.random_bool(0.05) { 20 } else { rng.random_range(0..=total / 10) };
                counts[s][g] = (total, parents);
                cells.push(AudienceCell::new(country(), sex, group, ParentFilter::All, total, at));
                cells.push(AudienceCell::new(country(), sex, group, ParentFilter::ParentOfChild0To12m, parents, at));
            }
        }
        let (snap, _) = AudienceSnapshot::assemble(country(), cells, at);
        for (s, sex) in Sex::ALL.into_iter().enumerate() {
            let rates: Vec<f64> = counts[s].iter().map(|(t, p)| *p as f64 / *t as f64).collect();
            let floored = counts[s].iter().any(|(t, p)| *t == 20 || *p == 20);
            let est = estimate_country(&snap, sex, LowerBoundPolicy::Any);
            if rates.iter().all(|r| *r == 0.0) {
                assert!(!est.eligible);
                continue;
            }
            let want = exact_weighted_mean(&MIDPOINTS, &rates);
            let got = mac(&schedule_from_snapshot(&snap, sex).unwrap()).unwrap();
            assert!((got - want).abs() <= 1e-12 * want);
            assert_eq!(est.eligible, !floored);
            if floored {
                excluded += 1;
                assert_eq!(est.eligible_mac(), None);
            } else {
                assert_eq!(est.eligible_mac(), Some(got));
            }
        }
    }
    assert!(excluded > 0);
}
