mod common;

use comma_core::understanding::{
    kb_only_prf, majority_baseline_prf, predict, train_understanding, uniform_random_expected_f1,
    UnderstandingHyper, VotingConfig,
};
use comma_core::{LabelSpace, Task};

#[test]
fn desk_training_beats_baselines() {
    let splits = common::synth_splits(330, 11);
    println!("train {} dev {}", splits.train.len(), splits.dev.len());
    for task in [Task::Eu, Task::Mu] {
        let space = task.target_space().unwrap();
        let kb = common::kb_for(&splits, space);
        let hyper = UnderstandingHyper { epochs: 3, ..UnderstandingHyper::desk() };
        let t = std::time::Instant::now();
        let (model, report) = train_understanding(&splits, task, &hyper, VotingConfig::default(), &kb).unwrap();
        let maj = majority_baseline_prf(&splits.train, &splits.dev, space);
        let (_, kb_only) = kb_only_prf(&kb, &splits.train, &splits.dev, &hyper.threshold_grid);
        let rnd = uniform_random_expected_f1(&splits.dev, space);
        println!("{task:?} {:?} maj {:.4} kb {:.4} rnd {:.4} in {:?}", report.curve, maj.f1, kb_only.f1, rnd, t.elapsed());
        assert!(model.dev_metrics["micro_f1"] > maj.f1);
        assert!(kb_only.f1 > rnd);
        assert!(report.curve.iter().all(|r| r.max_clipped_norm <= hyper.grad_norm + 1e-9));
        let p1 = predict(&splits.dev[0], &model, &kb).unwrap();
        let p2 = predict(&splits.dev[0], &model, &kb).unwrap();
        assert_eq!(p1, p2);
        let _ = LabelSpace::Emotion;
    }
}
