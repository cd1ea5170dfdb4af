//! User-level train/test partitioning: every participant's windows land
//! entirely on one side, so no individual leaks across the split.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

use super::TrainError;

/// Splits participant IDs into disjoint train/test sets.
///
/// IDs are sorted before the seeded shuffle, so the result depends only on
/// the set of participants, their labels, `fraction`, and `seed` — not on
/// input order. With `stratify`, the fraction is applied per fatigue class
/// (train count per class = round(fraction·n), clamped so both sides keep at
/// least one participant of that class); otherwise it is applied to the pool
/// as a whole. Both returned lists are sorted.
pub fn split_users(
    participants: &[String],
    labels: &[bool],
    fraction: f64,
    seed: u64,
    stratify: bool,
) -> Result<(Vec<String>, Vec<String>), TrainError> {
    if participants.len() != labels.len() {
        return Err(TrainError::Input(format!(
            "{} participants but {} labels",
            participants.len(),
            labels.len()
        )));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(TrainError::Input(format!(
            "split fraction {fraction} outside (0, 1)"
        )));
    }
    let unique: HashSet<&String> = participants.iter().collect();
    if unique.len() != participants.len() {
        return Err(TrainError::Input("duplicate participant id".into()));
    }

    // canonical order, independent of caller ordering
    let mut order: Vec<usize> = (0..participants.len()).collect();
    order.sort_by(|&a, &b| participants[a].cmp(&participants[b]));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut take = |ids: &mut Vec<&String>, rng: &mut ChaCha8Rng| {
        ids.shuffle(rng);
        let n = ids.len();
        let n_train = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
        for (i, id) in ids.iter().enumerate() {
            if i < n_train {
                train.push((*id).clone());
            } else {
                test.push((*id).clone());
            }
        }
    };

    if stratify {
        let mut per_class: [Vec<&String>; 2] = [Vec::new(), Vec::new()];
        for &i in &order {
            per_class[labels[i] as usize].push(&participants[i]);
        }
        for (class, ids) in per_class.iter_mut().enumerate() {
            if ids.len() < 2 {
                return Err(TrainError::TooFewParticipants {
                    needed: 2,
                    got: ids.len(),
                    detail: format!("class {class} (stratified split needs 2 per class)"),
                });
            }
        }
        for ids in per_class.iter_mut() {
            take(ids, &mut rng);
        }
    } else {
        if participants.len() < 2 {
            return Err(TrainError::TooFewParticipants {
                needed: 2,
                got: participants.len(),
                detail: "split needs at least one participant per side".into(),
            });
        }
        let mut ids: Vec<&String> = order.iter().map(|&i| &participants[i]).collect();
        take(&mut ids, &mut rng);
    }

    train.sort();
    test.sort();
    Ok((train, test))
}
