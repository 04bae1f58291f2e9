use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::params::LogisticHead;
use crate::numcore::sigmoid;
use crate::{MovieId, UserId};

/// Everything known about a user at scoring time.
///
/// `attended` lists the user's training-visible attendances only (most
/// recent first, possibly capped); held-out pools never leak in. Frequency
/// and recency are window-normalized scalars from the full event history.
#[derive(Debug, Clone)]
pub struct UserContext {
    pub user_id: UserId,
    pub attended: Vec<MovieId>,
    pub frequency: f64,
    pub recency: f64,
    pub demographics: Option<Vec<f64>>,
}

impl UserContext {
    pub fn new(user_id: UserId) -> Self {
        UserContext {
            user_id,
            attended: Vec::new(),
            frequency: 0.0,
            recency: 1.0,
            demographics: None,
        }
    }
}

/// Sums the movie vectors of the user's attended movies, always excluding
/// the target movie, and appends demographics when present. An empty
/// attendance set yields the zero vector.
pub fn build_user_vector(
    ctx: &UserContext,
    movie_vectors: &BTreeMap<MovieId, Vec<f64>>,
    target_movie: &str,
    vector_dim: usize,
) -> Result<Vec<f64>> {
    let mut user_vec = vec![0.0; vector_dim];
    for movie in &ctx.attended {
        if movie == target_movie {
            continue;
        }
        let v = movie_vectors
            .get(movie)
            .ok_or_else(|| Error::MissingMovieVector(movie.clone()))?;
        for (acc, x) in user_vec.iter_mut().zip(v) {
            *acc += x;
        }
    }
    if let Some(demo) = &ctx.demographics {
        user_vec.extend_from_slice(demo);
    }
    Ok(user_vec)
}

/// Distance-based CF score: the dot product of user and movie vectors.
pub fn cf_score(user_vector: &[f64], movie_vector: &[f64]) -> f64 {
    assert_eq!(
        user_vector.len(),
        movie_vector.len(),
        "cf_score dimension mismatch: {} vs {}",
        user_vector.len(),
        movie_vector.len()
    );
    user_vector
        .iter()
        .zip(movie_vector)
        .map(|(a, b)| a * b)
        .sum()
}

/// Logit of the logistic head over (CF score, frequency, recency).
pub fn attendance_logit(score: f64, frequency: f64, recency: f64, head: &LogisticHead) -> f64 {
    head.w_score * score + head.w_frequency * frequency + head.w_recency * recency + head.bias
}

/// Attendance probability in (0, 1).
pub fn predict_attendance(score: f64, frequency: f64, recency: f64, head: &LogisticHead) -> f64 {
    sigmoid(attendance_logit(score, frequency, recency, head))
}
