use super::MetricsError;
use crate::model::EmbeddingVector;

/// Cosine similarity of two embeddings from the same encoder, clamped to [-1, 1].
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, MetricsError> {
    if a.encoder_id() != b.encoder_id() {
        return Err(MetricsError::EncoderMismatch(
            a.encoder_id().to_string(),
            b.encoder_id().to_string(),
        ));
    }
    if a.dim() != b.dim() {
        return Err(MetricsError::DimensionMismatch(a.dim(), b.dim()));
    }
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(MetricsError::DegenerateEmbedding);
    }
    let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
