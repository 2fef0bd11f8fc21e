use commsearch::eval::{evaluate, Models, Summary};
use commsearch_core::encoder::{pretrain_encoder, EncoderConfig};
use commsearch_core::refiner::{train_refiner, RefineConfig};
use commsearch_core::synthetic::{gen_synthetic, SyntheticSpec};

/// Paired over 20 seeds on a 3-block fixture: the pooled median F1 of the
/// refined communities is at least that of the coarse candidates.
#[test]
fn refinement_does_not_lower_the_median_f1() {
    let (mut coarse, mut refined) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let spec = SyntheticSpec {
            blocks: 3,
            block_size: 20,
            p_in: 0.35,
            p_out: 0.05,
            k: 12,
            attrs_per_block: 4,
            attr_noise: 0.1,
            seed,
        };
        let (g, truth) = gen_synthetic(&spec).unwrap();
        let ecfg = EncoderConfig { hidden: 16, out: 16, epochs: 100, ..Default::default() };
        let encoder = pretrain_encoder(&g, &truth, &ecfg, seed).unwrap().model;
        let cfg = RefineConfig { episodes: 150, ..Default::default() };
        let policy = train_refiner(&g, &truth, &encoder, &cfg, seed).unwrap().policy;
        let models = Models { encoder: &encoder, policy: &policy };
        let report = evaluate(&g, Some(models), &truth, &cfg, seed, 1).unwrap();
        assert_eq!(report.records.len(), 3);
        for r in &report.records {
            coarse.push(r.coarse.f1);
            refined.push(r.refined.f1);
        }
    }
    let (c, r) = (Summary::of(&coarse), Summary::of(&refined));
    assert!(r.median >= c.median, "refined median {} vs coarse median {}", r.median, c.median);
}
