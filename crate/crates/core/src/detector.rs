use crate::corpus::{Corpus, RawEmail};
use crate::error::Result;
use crate::knn::{fit, Distance, SenderProfileModel, SpearVerdict};
use crate::vectorize::{FeatureSubset, FeatureVector, TokenizedEmail, Vocabulary};

/// A feature subset, its vocabulary and the sender profiles fitted on it.
#[derive(Debug, Clone)]
pub struct Detector {
    pub subset: FeatureSubset,
    pub vocab: Vocabulary,
    pub model: SenderProfileModel,
}

impl Detector {
    pub fn train(
        training: &Corpus,
        subset: &FeatureSubset,
        k: usize,
        distance: Distance,
    ) -> Result<Self> {
        let tokens: Vec<TokenizedEmail> = training.emails().iter().map(TokenizedEmail::new).collect();
        let labels: Vec<String> = training
            .emails()
            .iter()
            .map(|e| e.claimed_sender().to_string())
            .collect();
        Self::from_tokenized(&tokens, labels, subset, k, distance)
    }

    pub fn from_tokenized(
        training: &[TokenizedEmail],
        labels: Vec<String>,
        subset: &FeatureSubset,
        k: usize,
        distance: Distance,
    ) -> Result<Self> {
        let vocab = Vocabulary::from_tokenized(training, subset)?;
        let vectors: Vec<FeatureVector> = training.iter().map(|t| vocab.vectorize_tokens(t)).collect();
        let model = fit(vectors, labels, k, distance)?;
        Ok(Detector {
            subset: subset.clone(),
            vocab,
            model,
        })
    }

    pub fn vectorize(&self, email: &RawEmail) -> FeatureVector {
        self.vocab.vectorize_tokens(&TokenizedEmail::new(email))
    }

    pub fn detect(&self, email: &RawEmail) -> Result<SpearVerdict> {
        self.detect_tokens(&TokenizedEmail::new(email), email.claimed_sender())
    }

    pub fn detect_tokens(&self, email: &TokenizedEmail, claimed_sender: &str) -> Result<SpearVerdict> {
        let v = self.vocab.vectorize_tokens(email);
        let predicted = self.model.predict_sender(&v)?;
        Ok(SpearVerdict::new(predicted.to_string(), claimed_sender.to_string()))
    }
}
