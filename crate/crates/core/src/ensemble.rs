//! Group voting over aux predictions and the correction rule applied to
//! the major prediction.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::aiem::PredictionDistribution;
use crate::error::{Error, Result};

/// A group decision and the positive-class confidence behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoteResult {
    pub label: u8,
    /// Mean p1 for soft votes, share of positive member votes for hard votes.
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDecision {
    pub final_label: u8,
    pub corrected: bool,
    pub major_label: u8,
    /// soft 0, hard 0, soft 1, hard 1
    pub votes: [VoteResult; 4],
}

/// Splits distributions by the classifier that produced them.
pub fn split_groups(
    aux: &[PredictionDistribution],
    assignment: &[usize],
) -> Result<(Vec<PredictionDistribution>, Vec<PredictionDistribution>)> {
    if aux.len() != assignment.len() {
        return Err(Error::DimensionMismatch {
            context: "classifier assignment",
            expected: aux.len(),
            actual: assignment.len(),
        });
    }
    let mut groups = (Vec::new(), Vec::new());
    for (p, &g) in aux.iter().zip(assignment) {
        match g {
            0 => groups.0.push(*p),
            1 => groups.1.push(*p),
            other => return Err(Error::Config(format!("unknown aux classifier {other}"))),
        }
    }
    if groups.0.is_empty() {
        return Err(Error::EmptyGroup(0));
    }
    if groups.1.is_empty() {
        return Err(Error::EmptyGroup(1));
    }
    Ok(groups)
}

/// Parity assignment for `n` segments.
pub fn parity_assignment(n: usize) -> Vec<usize> {
    (0..n).map(|i| i % 2).collect()
}

/// Averages p0 and p1; exact ties go to `tie_label`.
pub fn soft_vote(group: &[PredictionDistribution], tie_label: u8) -> VoteResult {
    assert!(!group.is_empty(), "soft vote over an empty group");
    let m = group.len() as f64;
    let p0 = group.iter().map(|p| p.p0).sum::<f64>() / m;
    let p1 = group.iter().map(|p| p.p1).sum::<f64>() / m;
    let label = if p1 > p0 {
        1
    } else if p0 > p1 {
        0
    } else {
        tie_label
    };
    VoteResult { label, confidence: p1 }
}

/// Majority of member argmax labels; a member tie goes to `tie_label`, a
/// group tie to the group's soft vote.
pub fn hard_vote(group: &[PredictionDistribution], tie_label: u8) -> VoteResult {
    assert!(!group.is_empty(), "hard vote over an empty group");
    let member = |p: &PredictionDistribution| {
        if p.p1 > p.p0 {
            1
        } else if p.p0 > p.p1 {
            0
        } else {
            tie_label
        }
    };
    let ones = group.iter().filter(|p| member(p) == 1).count();
    let zeros = group.len() - ones;
    let label = match ones.cmp(&zeros) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => soft_vote(group, tie_label).label,
    };
    VoteResult {
        label,
        confidence: ones as f64 / group.len() as f64,
    }
}

/// Overrides the major label only when all four group votes agree with
/// each other and disagree with it.
pub fn self_ensemble(
    major: &PredictionDistribution,
    group0: &[PredictionDistribution],
    group1: &[PredictionDistribution],
) -> Result<EnsembleDecision> {
    if group0.is_empty() {
        return Err(Error::EmptyGroup(0));
    }
    if group1.is_empty() {
        return Err(Error::EmptyGroup(1));
    }
    let major_label = major.label();
    let votes = [
        soft_vote(group0, major_label),
        hard_vote(group0, major_label),
        soft_vote(group1, major_label),
        hard_vote(group1, major_label),
    ];
    Ok(decide(major_label, votes))
}

/// The decision when one group has no members: the major prediction
/// stands and every vote echoes it.
pub fn major_only(major: &PredictionDistribution) -> EnsembleDecision {
    let major_label = major.label();
    let vote = VoteResult {
        label: major_label,
        confidence: major.p1,
    };
    decide(major_label, [vote; 4])
}

/// The correction rule on labels alone.
pub fn decide(major_label: u8, votes: [VoteResult; 4]) -> EnsembleDecision {
    let first = votes[0].label;
    let unanimous = votes.iter().all(|v| v.label == first);
    let corrected = unanimous && first != major_label;
    EnsembleDecision {
        final_label: if corrected { first } else { major_label },
        corrected,
        major_label,
        votes,
    }
}

/// Writes decision records as CSV with a header row.
pub fn write_decisions<W: Write>(out: W, rows: &[(String, u8, EnsembleDecision)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "id", "label", "major", "soft0", "hard0", "soft1", "hard1", "final", "corrected",
    ])?;
    for (id, label, d) in rows {
        w.write_record([
            id.clone(),
            label.to_string(),
            d.major_label.to_string(),
            d.votes[0].label.to_string(),
            d.votes[1].label.to_string(),
            d.votes[2].label.to_string(),
            d.votes[3].label.to_string(),
            d.final_label.to_string(),
            u8::from(d.corrected).to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(p1: f64) -> PredictionDistribution {
        PredictionDistribution::new(1.0 - p1, p1)
    }

    #[test]
    fn groups_follow_parity() {
        let aux = vec![d(0.1); 8];
        let (a, b) = split_groups(&aux, &parity_assignment(8)).unwrap();
        assert_eq!((a.len(), b.len()), (4, 4));
        let (a, b) = split_groups(&aux[..6], &parity_assignment(6)).unwrap();
        assert_eq!((a.len(), b.len()), (3, 3));
        let err = split_groups(&aux[..3], &[0, 0, 0]).unwrap_err();
        assert_eq!(err.to_string(), "empty group 1");
    }

    #[test]
    fn vote_examples() {
        let v = soft_vote(&[PredictionDistribution::new(0.9, 0.1), PredictionDistribution::new(0.4, 0.6)], 1);
        assert_eq!(v.label, 0);
        assert!((v.confidence - 0.35).abs() < 1e-15);
        let v = soft_vote(&[d(0.8), d(0.8)], 0);
        assert_eq!((v.label, v.confidence), (1, 0.8));
        assert_eq!(soft_vote(&[d(0.3), d(0.7)], 1).label, 1);
        assert_eq!(soft_vote(&[d(0.3), d(0.7)], 0).label, 0);

        assert_eq!(hard_vote(&[d(0.9), d(0.6), d(0.2)], 0).label, 1);
        // member tie: labels {1, 0}, soft average 0.55 → 1
        assert_eq!(hard_vote(&[d(0.9), d(0.2)], 0).label, 1);
        assert_eq!(hard_vote(&[d(0.6), d(0.1)], 1).label, 0);
    }

    #[test]
    fn correction_examples() {
        let major = d(0.9);
        let zeros = [d(0.1), d(0.2)];
        let dec = self_ensemble(&major, &zeros, &zeros).unwrap();
        assert_eq!((dec.final_label, dec.corrected), (0, true));

        let v = |l| VoteResult { label: l, confidence: 0.0 };
        let dec = decide(1, [v(0), v(1), v(0), v(0)]);
        assert_eq!((dec.final_label, dec.corrected), (1, false));
        let dec = decide(1, [v(1); 4]);
        assert_eq!((dec.final_label, dec.corrected), (1, false));
    }

    #[test]
    fn decisions_csv() {
        let dec = self_ensemble(&d(0.9), &[d(0.1)], &[d(0.2)]).unwrap();
        let mut buf = Vec::new();
        write_decisions(&mut buf, &[("a".into(), 0, dec)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "id,label,major,soft0,hard0,soft1,hard1,final,corrected\na,0,1,0,0,0,0,0,1\n"
        );
    }

    proptest! {
        #[test]
        fn votes_are_order_free(ps in prop::collection::vec(0.0f64..=1.0, 1..8), rot in 0usize..8, tie in 0u8..2) {
            let g: Vec<_> = ps.iter().map(|&p| d(p)).collect();
            let mut r = g.clone();
            r.rotate_left(rot % g.len());
            r.reverse();
            prop_assert_eq!(hard_vote(&g, tie).label, hard_vote(&r, tie).label);
            prop_assert_eq!(soft_vote(&g, tie).label, soft_vote(&r, tie).label);
        }

        #[test]
        fn unanimous_groups(ps in prop::collection::vec(0.5001f64..=1.0, 1..8), flip in any::<bool>(), tie in 0u8..2) {
            let g: Vec<_> = ps.iter().map(|&p| if flip { d(1.0 - p) } else { d(p) }).collect();
            let l = u8::from(!flip);
            prop_assert_eq!(soft_vote(&g, tie).label, l);
            prop_assert_eq!(hard_vote(&g, tie).label, l);
        }
    }
}
