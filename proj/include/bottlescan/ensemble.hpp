#pragma once

#include <map>
#include <optional>
#include <span>

#include "bottlescan/classifiers.hpp"
#include "bottlescan/dataset.hpp"
#include "bottlescan/features.hpp"

namespace bottlescan {

// Per-spec design matrices over a fixed dataset, extracted once and reused
// across candidate training, independence tests and evaluation.
class FeatureCache {
public:
    explicit FeatureCache(const LabeledDataset& data) : data_(&data) {}

    const FeatureMatrix& matrix(const FeatureSpec& spec);
    const LabeledDataset& dataset() const { return *data_; }
    Eigen::Index n_samples() const { return static_cast<Eigen::Index>(data_->size()); }

private:
    const LabeledDataset* data_;
    std::map<std::string, FeatureMatrix> cache_;
};

// One trained (classifier, feature) pair with held-out error statistics.
struct SubClassifier {
    std::unique_ptr<Classifier> model;
    FeatureSpec feature;
    double delta_false = 0.0;  // held-out error rate, equals p_wrong
    double p_correct = 0.0;
    double p_wrong = 0.0;

    int predict(const Image& roi) const;
};

struct EnsembleModel {
    std::vector<SubClassifier> members;

    int size() const { return static_cast<int>(members.size()); }
    std::vector<int> member_votes(const Image& roi) const;

    void save(std::ostream& out) const;
    static EnsembleModel load(std::istream& in);
    void save_file(const std::filesystem::path& path) const;
    static EnsembleModel load_file(const std::filesystem::path& path);
};

struct EnsembleParams {
    int T = 7;
    double theta_it = 0.05;
    double delta_low = 0.001;
    double delta_up = 0.5;
    double alpha_train = 0.6;
    double alpha_test = 0.4;
    double beta = 0.3;
    int n_max_pool = 100;
    std::uint64_t seed = 0;
    // Finite-sample slack: independence-test subsets never shrink below this.
    int min_it_samples = 200;

    void validate() const;
};

struct DisagreementStats {
    double empirical = 0.0;
    double expected = 0.0;
    double statistic = 0.0;  // |expected - empirical|
};

// ------------------------------------------------------------------ voting

// Sign of the member vote sum; T odd so the sum is never zero.
int majority_vote(const EnsembleModel& m, const Image& roi);

// Eq-of-record precision of a T-member vote of independent classifiers
// with common error rate epsilon.
double analytic_precision(double epsilon, int T);

struct PrecisionPoint {
    double epsilon;
    int T;
    double precision;
};

std::vector<PrecisionPoint> precision_curve(std::span<const double> epsilons,
                                            std::span<const int> Ts);

// --------------------------------------------------- independence testing

// Prediction-vector layer; also used by tests with simulated predictors.
double empirical_disagreement(const Labels& a, const Labels& b);
double expected_disagreement(double pa_correct, double pb_correct);
DisagreementStats disagreement_stats(double pa_correct, double pb_correct, const Labels& a,
                                     const Labels& b);
bool independence_test(const DisagreementStats& stats, double theta_it);

// SubClassifier layer over an indexed subset of the cached dataset.
Labels predict_subset(const SubClassifier& sub, FeatureCache& cache,
                      std::span<const int> indices);
double empirical_disagreement(const SubClassifier& a, const SubClassifier& b,
                              FeatureCache& cache, std::span<const int> indices);
double expected_disagreement(const SubClassifier& a, const SubClassifier& b);
bool independence_test(const SubClassifier& a, const SubClassifier& b, FeatureCache& cache,
                       std::span<const int> indices, double theta_it);

// ------------------------------------------------------------- selection

struct CandidateResult {
    std::optional<SubClassifier> accepted;
    std::string rejection;  // set when not accepted
};

// Fits on the alpha_train split and measures error statistics on the
// alpha_test split, without the error gate. Throws on a single-class
// training split.
SubClassifier fit_and_score(const ClassifierConfig& cfg, const FeatureSpec& spec,
                            FeatureCache& cache, const EnsembleParams& params,
                            std::uint64_t seed);

// Fits on the alpha_train split, measures error statistics on the
// alpha_test split, gates on delta_low < delta_false < delta_up.
CandidateResult train_candidate(const ClassifierConfig& cfg, const FeatureSpec& spec,
                                FeatureCache& cache, const EnsembleParams& params,
                                std::uint64_t seed);

struct BuildDiagnostics {
    int draws = 0;
    int gate_rejections = 0;
    int it_rejections = 0;
    int degenerate_rejections = 0;
    // Mean fraction of each accepted member's IT subsets overlapping its own
    // training split.
    double mean_it_train_overlap = 0.0;
};

struct BuildResult {
    EnsembleModel model;
    BuildDiagnostics diagnostics;
};

struct EnsembleBuildError : std::runtime_error {
    EnsembleBuildError(std::string msg, EnsembleModel partial_, BuildDiagnostics diag_)
        : std::runtime_error(std::move(msg)),
          partial(std::move(partial_)),
          diagnostics(diag_) {}
    EnsembleModel partial;
    BuildDiagnostics diagnostics;
};

using CandidatePool = std::vector<std::pair<ClassifierConfig, FeatureSpec>>;

// Table-style selection loop: sample candidates with replacement, gate on
// held-out error, require every pairwise independence test to pass.
BuildResult build_ensemble(FeatureCache& cache, const CandidatePool& pool,
                           const EnsembleParams& params);

// Bulk prediction over the cached dataset (used by evaluation and sweeps).
Labels ensemble_predict_all(const EnsembleModel& m, FeatureCache& cache);

}  // namespace bottlescan
