use serde::{Deserialize, Serialize};

use super::project::AlignedUtterance;

#[derive(Debug, Clone, PartialEq)]
pub enum QcDecision {
    Accept,
    Exclude(String),
}

/// Whether a QC failure removes the whole session or only weak utterances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QcScope {
    #[default]
    Session,
    Utterance,
}

/// Session-level gate: exclude when the session score is strictly below the threshold.
pub fn qc_filter(session: &[AlignedUtterance], min_session_score: f64) -> QcDecision {
    let Some(first) = session.first() else {
        return QcDecision::Exclude("session has no utterances".into());
    };
    let score = first.session_score;
    if score < min_session_score {
        QcDecision::Exclude(format!(
            "session {} alignment score {score:.4} below threshold {min_session_score}",
            first.id.session_id
        ))
    } else {
        QcDecision::Accept
    }
}

/// Apply QC under `scope`. Session scope keeps all or nothing; utterance scope
/// drops utterances whose token coverage falls below the threshold.
pub fn apply_qc(
    session: Vec<AlignedUtterance>,
    min_score: f64,
    scope: QcScope,
) -> (Vec<AlignedUtterance>, QcDecision) {
    match scope {
        QcScope::Session => match qc_filter(&session, min_score) {
            QcDecision::Accept => (session, QcDecision::Accept),
            excluded => (Vec::new(), excluded),
        },
        QcScope::Utterance => {
            let before = session.len();
            let kept: Vec<_> = session
                .into_iter()
                .filter(|u| u.token_coverage >= min_score)
                .collect();
            let decision = if kept.is_empty() && before > 0 {
                QcDecision::Exclude("no utterance met the coverage threshold".into())
            } else {
                QcDecision::Accept
            };
            (kept, decision)
        }
    }
}
