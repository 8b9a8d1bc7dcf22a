// Scratch probe for planted-interval recovery; not part of the deliverable.

use eegsal::attnet::{train, NetConfig, TrainConfig};
use eegsal::pipeline::prune_set;
use eegsal::saliency::{attention_for_trial, PruneConfig};
use eegsal::trialio::{generate_synthetic, SynthSpec};

fn iou(ranges: &[(usize, usize)], planted: (usize, usize)) -> f64 {
    let kept: usize = ranges
        .iter()
        .map(|&(s, e)| e.min(planted.1).saturating_sub(s.max(planted.0)))
        .sum();
    let kept_total: usize = ranges.iter().map(|&(s, e)| e - s).sum();
    let union = kept_total + (planted.1 - planted.0) - kept;
    kept as f64 / union as f64
}

fn main() {
    let t0 = std::time::Instant::now();
    let spec = SynthSpec {
        seed: 101,
        ..SynthSpec::default()
    };
    let train_set = generate_synthetic(&spec).unwrap();
    let test_set = generate_synthetic(&SynthSpec {
        trials_per_class: 20,
        seed: 202,
        ..spec.clone()
    })
    .unwrap();

    let net = NetConfig::default_for(5);
    let tc = TrainConfig::default();
    let out = train(&train_set, &net, &tc).unwrap();
    println!(
        "trained in {:.1}s, loss {} -> {}",
        t0.elapsed().as_secs_f64(),
        out.epoch_losses[0],
        out.epoch_losses.last().unwrap()
    );

    let cfg = PruneConfig::new(10, 4).unwrap();
    let planted = (spec.salient_start, spec.salient_start + spec.salient_len);
    let mut hits = 0;
    let mut total = 0;
    for trial in test_set.trials() {
        let a = attention_for_trial(&out.params, trial).unwrap();
        let kept = eegsal::saliency::prune_trial(trial, &a, &cfg).unwrap();
        let score = iou(&kept.kept_sample_ranges, planted);
        if score >= 0.5 {
            hits += 1;
        }
        total += 1;
        if total <= 5 {
            println!("trial {}: ranges {:?} iou {:.2}", trial.trial_id, kept.kept_sample_ranges, score);
        }
    }
    println!("IoU>=0.5 on {hits}/{total} test trials");

    // visual: mean attention per segment on one trial
    let a = attention_for_trial(&out.params, &test_set.trials()[0]).unwrap();
    let seg = 50;
    let means: Vec<f64> = (0..10)
        .map(|s| a.iter().skip(s * seg).take(seg).sum::<f64>() / seg as f64 * 1000.0)
        .collect();
    println!("segment attention x1000: {means:.3?}");

    // quick scenario comparison at the tuned-by-hand config
    let pruned_train = prune_set(&out.params, &train_set, &cfg).unwrap();
    let pruned_test = prune_set(&out.params, &test_set, &cfg).unwrap();
    let acc_pruned = eegsal::cspclf::evaluate(&pruned_train, &pruned_test, 2).unwrap();
    let acc_raw = eegsal::cspclf::evaluate(&train_set, &test_set, 2).unwrap();
    println!(
        "accuracy pruned {} vs raw {}",
        acc_pruned.accuracy, acc_raw.accuracy
    );
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
}
