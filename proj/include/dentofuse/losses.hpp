#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace dfuse {

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

/// Pixel embeddings with predictions and the derived TP/FN/FP index sets
/// per class. Probabilities are row-stochastic.
struct EmbeddingBatch {
    MatX embeddings;        // N x D
    MatX probabilities;     // N x K
    std::vector<int> predicted;
    std::vector<int> ground_truth;
    int num_classes = 0;

    std::vector<std::vector<int>> tp, fn, fp;  // per class

    std::size_t size() const { return std::size_t(embeddings.rows()); }

    /// predicted = argmax of probabilities.
    static EmbeddingBatch create(MatX embeddings, MatX probabilities,
                                 std::vector<int> ground_truth);
    static EmbeddingBatch create(MatX embeddings, MatX probabilities,
                                 std::vector<int> predicted,
                                 std::vector<int> ground_truth);
};

struct PrototypeBank {
    MatX prototypes;        // K x D
    double momentum = 0.999;  // retained proportion of the running prototype
};

struct LossConfig {
    double tau = 0.1;                // temperature
    double lambda_tec = 0.1;         // weight of the calibration term
    double th_l = 0.38;              // centroid soft-threshold bounds
    double th_u = 0.6;
    double boundary_fraction = 0.05; // top share of points treated as boundary
    int knn_k = 5;
    std::vector<double> class_weights{1.0, 2.0, 2.0};  // hard-mining weights
    double kept_fraction = 0.25;     // hard-mining kept share
};

/// prototypes <- m*prototypes + (1-m)*mean(TP embeddings); classes without
/// true positives keep their prototype.
PrototypeBank update_prototypes(const PrototypeBank& bank, const EmbeddingBatch& batch);

/// FP/FN penalty terms for one anchor: mean cosine similarity between the
/// anchor and the error pixels of its class (0 when the set is empty).
struct TecPenalties {
    double t_fp = 0.0;
    double t_fn = 0.0;
};
TecPenalties tec_penalties(const EmbeddingBatch& batch, int anchor);

struct LossValue {
    double value = 0.0;
    MatX gradient;  // same shape as the differentiated input
};

/// Prototype-contrastive calibration loss, averaged over all pixels, with
/// the analytic gradient w.r.t. every embedding (penalty cross-terms
/// included). Throws when tau <= 0 or a prototype/embedding has zero norm.
LossValue tec_loss(const EmbeddingBatch& batch, const PrototypeBank& bank,
                   const LossConfig& cfg);

/// Class-weighted cross entropy over the hardest kept_fraction of pixels
/// (at least one).
double awohem_ce(const MatX& probabilities, const std::vector<int>& ground_truth,
                 const LossConfig& cfg);

/// Lovasz extension of the Jaccard loss on softmax errors, averaged over
/// the classes present in the ground truth.
double lovasz_softmax(const MatX& probabilities, const std::vector<int>& ground_truth);

/// awohem + lambda * tec.
double seg_loss(const EmbeddingBatch& batch, const PrototypeBank& bank,
                const LossConfig& cfg);

/// Mean distance between soft-thresholded prediction centroids and ground
/// truth centroids over the non-gingiva classes (class 0 = gingiva).
/// Classes whose thresholded mass vanishes fall back to the centroid of all
/// positions. Gradient w.r.t. the positions.
LossValue centroid_loss(const MatX& probabilities,
                        const std::vector<Eigen::Vector3d>& positions,
                        const std::vector<int>& ground_truth, const LossConfig& cfg);

/// Cross entropy over the boundary points: the ceil(fraction*N) points with
/// the largest max-over-neighbors KL divergence.
double boundary_loss(const MatX& probabilities,
                     const std::vector<std::vector<int>>& neighbors,
                     const std::vector<int>& ground_truth, const LossConfig& cfg);

/// Variant building the K-nearest-neighbor graph from 3-d positions.
double boundary_loss(const MatX& probabilities,
                     const std::vector<Eigen::Vector3d>& positions,
                     const std::vector<int>& ground_truth, const LossConfig& cfg);

/// Epsilon-smoothed KL divergence between two probability rows.
double kl_divergence(const VecX& p, const VecX& q, double eps = 1e-8);

/// Per-point max-over-neighbors KL divergence (boundary score).
std::vector<double> boundary_scores(const MatX& probabilities,
                                    const std::vector<std::vector<int>>& neighbors);

/// Self-check battery used by the losses-check command: oracle values and
/// finite-difference gradient checks on random batches.
struct LossCheck {
    std::string name;
    bool passed = false;
    double detail = 0.0;  // measured error or value
};
std::vector<LossCheck> run_loss_checks(std::uint64_t seed);

}  // namespace dfuse
