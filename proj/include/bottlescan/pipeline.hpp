#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bottlescan/ensemble.hpp"
#include "bottlescan/imaging.hpp"
#include "bottlescan/synthgen.hpp"

namespace bottlescan {

struct PipelineConfig {
    TriggerConfig trigger{.patches = {{430, 320, 26, 30}, {460, 320, 26, 30}, {490, 320, 26, 30}},
                          .theta_thres = 0.15 * 26 * 30,
                          .n_background_frames = 10};
    Patch roi{405, 39, 150, 356};
    double lambda_avg = 0.5;

    FeatureSpec bhog_spec{FeatureKind::BHoG, 11, 11, 9, 1.0};
    FeatureSpec bgh_spec{FeatureKind::BGH, 10, 10, 16, 1.0};
    FeatureSpec raw_spec{FeatureKind::Raw, 1, 1, 2, 0.6};

    EnsembleParams ensemble;
    SceneSpec scene;

    std::filesystem::path dataset_path;
    std::filesystem::path model_path;
    std::filesystem::path report_dir;

    // All four families crossed with the three feature specs.
    CandidatePool default_pool() const;

    void validate() const;

    // Strict JSON round trip: unknown keys are errors.
    static PipelineConfig from_json_file(const std::filesystem::path& path);
    static PipelineConfig from_json_text(const std::string& text);
    std::string to_json_text() const;
};

struct Metrics {
    long n_total = 0;
    long n_qualified = 0;
    long n_defective = 0;
    long n_fp = 0;  // qualified bottle rejected
    long n_fn = 0;  // defective bottle passed
    double fp_rate = 0.0;  // NaN when no qualified samples
    double fn_rate = 0.0;  // NaN when no defective samples
    double error_rate = 0.0;
    double precision = 0.0;
};

Metrics evaluate(const Labels& predictions, const Labels& truth);
Metrics evaluate(const EnsembleModel& m, FeatureCache& cache);

// Copy of the dataset with every image gray-mean normalized; frames with a
// zero intensity sum are rejected.
LabeledDataset normalize_dataset(const LabeledDataset& d, double lambda_avg = 0.5);

struct InspectionEvent {
    int frame_index = 0;
    int verdict = 0;  // +-1, or 0 for a skipped degenerate frame
    std::vector<int> votes;
    bool skipped = false;
};

// Trigger loop over an ordered frame stream: background from the leading
// frames, then crop/normalize/vote on every rising edge.
std::vector<InspectionEvent> run_inspection(std::span<const Image> frames,
                                            const EnsembleModel& model,
                                            const PipelineConfig& cfg);

// ------------------------------------------------------------------ sweeps

// Grid of (feature variant, family) cells, one trained sub-classifier per
// cell; failed cells are recorded, the sweep continues.
std::string sweep_feature_params(FeatureCache& cache, std::span<const FeatureSpec> variants,
                                 std::span<const Family> families, const EnsembleParams& params);

// Ensemble size tradeoff: error rate and training-time ratio per T.
std::string sweep_T(FeatureCache& train_cache, FeatureCache& test_cache,
                    const CandidatePool& pool, std::span<const int> Ts,
                    const EnsembleParams& params);

// Training-label noise robustness; noise on the training set only, clean
// evaluation.
std::string sweep_label_noise(const LabeledDataset& train, FeatureCache& test_cache,
                              const CandidatePool& pool, std::span<const double> ratios,
                              const EnsembleParams& params);

// Analytic precision grid export.
std::string precision_curve_csv(std::span<const double> epsilons, std::span<const int> Ts);

}  // namespace bottlescan
