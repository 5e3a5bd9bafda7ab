#include "bottlescan/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace bottlescan {

namespace {

constexpr char kMagic[] = "BSEN";
constexpr std::uint32_t kVersion = 1;

void save_spec(BinaryWriter& w, const FeatureSpec& spec) {
    w.str(to_string(spec.kind));
    w.i32(spec.rows);
    w.i32(spec.cols);
    w.i32(spec.n_bins);
    w.f64(spec.scale);
}

FeatureSpec load_spec(BinaryReader& r) {
    FeatureSpec spec;
    spec.kind = feature_kind_from_string(r.str());
    spec.rows = r.i32();
    spec.cols = r.i32();
    spec.n_bins = r.i32();
    spec.scale = r.f64();
    return spec;
}

// Seeded draw of `count` distinct indices from [0, n).
std::vector<int> sample_indices(int n, int count, Rng& rng) {
    std::vector<int> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    count = std::min(count, n);
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> pick(i, n - 1);
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(pick(rng))]);
    }
    idx.resize(static_cast<size_t>(count));
    return idx;
}

double overlap_fraction(std::span<const int> subset, const std::vector<int>& sorted_train) {
    if (subset.empty()) return 0.0;
    long hits = 0;
    for (int i : subset)
        if (std::binary_search(sorted_train.begin(), sorted_train.end(), i)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(subset.size());
}

}  // namespace

const FeatureMatrix& FeatureCache::matrix(const FeatureSpec& spec) {
    const std::string key = spec.name();
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;

    const auto& items = data_->items;
    if (items.empty()) throw std::invalid_argument("feature cache: empty dataset");
    const auto dim = spec.dim(items[0].image.rows(), items[0].image.cols());
    FeatureMatrix m(static_cast<Eigen::Index>(items.size()), dim);
    for (size_t i = 0; i < items.size(); ++i)
        m.row(static_cast<Eigen::Index>(i)) = extract(items[i].image, spec);
    return cache_.emplace(key, std::move(m)).first->second;
}

int SubClassifier::predict(const Image& roi) const { return model->predict(extract(roi, feature)); }

std::vector<int> EnsembleModel::member_votes(const Image& roi) const {
    std::vector<int> votes;
    votes.reserve(members.size());
    for (const auto& m : members) votes.push_back(m.predict(roi));
    return votes;
}

int majority_vote(const EnsembleModel& m, const Image& roi) {
    if (m.members.empty() || m.members.size() % 2 == 0)
        throw std::invalid_argument("majority_vote: member count must be odd");
    int sum = 0;
    for (int v : m.member_votes(roi)) sum += v;
    return sum > 0 ? +1 : -1;
}

void EnsembleModel::save(std::ostream& out) const {
    BinaryWriter w(out);
    w.str(kMagic);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(members.size()));
    for (const auto& m : members) {
        save_spec(w, m.feature);
        w.f64(m.delta_false);
        w.f64(m.p_correct);
        w.f64(m.p_wrong);
        m.model->save(w);
    }
}

EnsembleModel EnsembleModel::load(std::istream& in) {
    BinaryReader r(in);
    if (r.str() != kMagic) throw std::runtime_error("ensemble artifact: bad magic");
    if (r.u32() != kVersion) throw std::runtime_error("ensemble artifact: unsupported version");
    EnsembleModel model;
    const auto count = r.u32();
    model.members.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        SubClassifier sub;
        sub.feature = load_spec(r);
        sub.delta_false = r.f64();
        sub.p_correct = r.f64();
        sub.p_wrong = r.f64();
        sub.model = Classifier::load(r);
        model.members.push_back(std::move(sub));
    }
    return model;
}

void EnsembleModel::save_file(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model artifact " + path.string());
    save(out);
}

EnsembleModel EnsembleModel::load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model artifact " + path.string());
    return load(in);
}

void EnsembleParams::validate() const {
    if (T < 1 || T % 2 == 0) throw std::invalid_argument("ensemble: T must be odd");
    if (theta_it <= 0.0) throw std::invalid_argument("ensemble: theta_it <= 0");
    if (!(delta_low >= 0.0 && delta_low < delta_up && delta_up <= 0.5))
        throw std::invalid_argument("ensemble: need 0 <= delta_low < delta_up <= 0.5");
    if (!(alpha_train > 0.0 && alpha_test > 0.0 && alpha_train + alpha_test <= 1.0))
        throw std::invalid_argument("ensemble: bad train/test split fractions");
    if (!(beta > 0.0 && beta <= 1.0)) throw std::invalid_argument("ensemble: beta outside (0,1]");
    if (n_max_pool < 1) throw std::invalid_argument("ensemble: n_max_pool < 1");
    if (min_it_samples < 1) throw std::invalid_argument("ensemble: min_it_samples < 1");
}

double analytic_precision(double epsilon, int T) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw std::invalid_argument("analytic_precision: epsilon outside [0,1]");
    if (T < 1 || T % 2 == 0) throw std::invalid_argument("analytic_precision: T must be odd");

    // Error = P(at most floor(T/2) members correct).
    double error = 0.0;
    double binom = 1.0;  // C(T, k), updated incrementally
    for (int k = 0; k <= T / 2; ++k) {
        if (k > 0) binom = binom * (T - k + 1) / k;
        error += binom * std::pow(1.0 - epsilon, k) * std::pow(epsilon, T - k);
    }
    return 1.0 - error;
}

std::vector<PrecisionPoint> precision_curve(std::span<const double> epsilons,
                                            std::span<const int> Ts) {
    std::vector<PrecisionPoint> out;
    out.reserve(epsilons.size() * Ts.size());
    for (double eps : epsilons)
        for (int T : Ts) out.push_back({eps, T, analytic_precision(eps, T)});
    return out;
}

double empirical_disagreement(const Labels& a, const Labels& b) {
    if (a.size() != b.size() || a.size() == 0)
        throw std::invalid_argument("empirical_disagreement: empty or mismatched predictions");
    long diff = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) ++diff;
    return static_cast<double>(diff) / static_cast<double>(a.size());
}

double expected_disagreement(double pa_correct, double pb_correct) {
    return (1.0 - pa_correct) * pb_correct + pa_correct * (1.0 - pb_correct);
}

DisagreementStats disagreement_stats(double pa_correct, double pb_correct, const Labels& a,
                                     const Labels& b) {
    DisagreementStats stats;
    stats.empirical = empirical_disagreement(a, b);
    stats.expected = expected_disagreement(pa_correct, pb_correct);
    stats.statistic = std::abs(stats.expected - stats.empirical);
    return stats;
}

bool independence_test(const DisagreementStats& stats, double theta_it) {
    return stats.statistic < theta_it;
}

Labels predict_subset(const SubClassifier& sub, FeatureCache& cache,
                      std::span<const int> indices) {
    const FeatureMatrix& m = cache.matrix(sub.feature);
    Labels out(static_cast<Eigen::Index>(indices.size()));
    for (size_t i = 0; i < indices.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = sub.model->predict(m.row(indices[i]));
    return out;
}

double empirical_disagreement(const SubClassifier& a, const SubClassifier& b,
                              FeatureCache& cache, std::span<const int> indices) {
    if (indices.empty()) throw std::invalid_argument("empirical_disagreement: empty subset");
    return empirical_disagreement(predict_subset(a, cache, indices),
                                  predict_subset(b, cache, indices));
}

double expected_disagreement(const SubClassifier& a, const SubClassifier& b) {
    return expected_disagreement(a.p_correct, b.p_correct);
}

bool independence_test(const SubClassifier& a, const SubClassifier& b, FeatureCache& cache,
                       std::span<const int> indices, double theta_it) {
    if (indices.empty()) throw std::invalid_argument("independence_test: empty subset");
    const DisagreementStats stats = disagreement_stats(
        a.p_correct, b.p_correct, predict_subset(a, cache, indices),
        predict_subset(b, cache, indices));
    return independence_test(stats, theta_it);
}

SubClassifier fit_and_score(const ClassifierConfig& cfg, const FeatureSpec& spec,
                            FeatureCache& cache, const EnsembleParams& params,
                            std::uint64_t seed) {
    params.validate();
    const int n = static_cast<int>(cache.n_samples());
    const int n_train = std::max(2, static_cast<int>(std::lround(params.alpha_train * n)));
    const int n_test = std::max(1, static_cast<int>(std::lround(params.alpha_test * n)));
    if (n_train + n_test > n)
        throw std::invalid_argument("train_candidate: dataset too small for split fractions");

    Rng rng(seed);
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    // Fitting sees the dataset labels as-is (including injected noise);
    // error statistics are measured against the clean labels, mirroring a
    // noisy training signal evaluated on trusted ground truth.
    const Labels all = cache.dataset().labels();
    const Labels truth = cache.dataset().clean_labels();
    const FeatureMatrix& features = cache.matrix(spec);

    FeatureMatrix x_train(n_train, features.cols());
    Labels y_train(n_train);
    for (int i = 0; i < n_train; ++i) {
        x_train.row(i) = features.row(order[static_cast<size_t>(i)]);
        y_train[i] = all[order[static_cast<size_t>(i)]];
    }
    if ((y_train.array() == y_train[0]).all())
        throw std::invalid_argument("degenerate split");

    SubClassifier sub;
    sub.feature = spec;
    sub.model = fit(cfg, x_train, y_train);

    long wrong = 0;
    for (int i = 0; i < n_test; ++i) {
        const int s = order[static_cast<size_t>(n_train + i)];
        if (sub.model->predict(features.row(s)) != truth[s]) ++wrong;
    }
    sub.delta_false = static_cast<double>(wrong) / n_test;
    sub.p_wrong = sub.delta_false;
    sub.p_correct = 1.0 - sub.delta_false;
    return sub;
}

CandidateResult train_candidate(const ClassifierConfig& cfg, const FeatureSpec& spec,
                                FeatureCache& cache, const EnsembleParams& params,
                                std::uint64_t seed) {
    SubClassifier sub;
    try {
        sub = fit_and_score(cfg, spec, cache, params, seed);
    } catch (const std::invalid_argument& e) {
        if (std::string(e.what()).find("degenerate") != std::string::npos)
            return {.accepted = std::nullopt, .rejection = "degenerate split"};
        throw;
    }

    if (!(params.delta_low < sub.delta_false))
        return {.accepted = std::nullopt,
                .rejection = "error gate: delta_false <= delta_low"};
    if (!(sub.delta_false < params.delta_up))
        return {.accepted = std::nullopt,
                .rejection = "error gate: delta_false >= delta_up"};

    CandidateResult result;
    result.accepted = std::move(sub);
    return result;
}

BuildResult build_ensemble(FeatureCache& cache, const CandidatePool& pool,
                           const EnsembleParams& params) {
    params.validate();
    if (pool.empty()) throw std::invalid_argument("build_ensemble: empty candidate pool");

    const int n = static_cast<int>(cache.n_samples());
    const int it_size = std::max(params.min_it_samples,
                                 static_cast<int>(std::lround(params.beta * n)));

    Rng rng(derive_seed(params.seed, "build"));
    std::uniform_int_distribution<size_t> pick_pool(0, pool.size() - 1);

    BuildResult result;
    BuildDiagnostics& diag = result.diagnostics;
    std::vector<std::vector<int>> member_train_splits;
    double overlap_sum = 0.0;
    long overlap_count = 0;

    for (int draw = 0; draw < params.n_max_pool; ++draw) {
        if (result.model.size() == params.T) break;
        ++diag.draws;

        auto [cfg, spec] = pool[pick_pool(rng)];
        const std::uint64_t candidate_seed =
            derive_seed(params.seed, static_cast<std::uint64_t>(draw));
        cfg.seed = derive_seed(candidate_seed, "fit");

        CandidateResult cand;
        try {
            cand = train_candidate(cfg, spec, cache, params, derive_seed(candidate_seed, "split"));
        } catch (const std::invalid_argument&) {
            ++diag.degenerate_rejections;
            continue;
        }
        if (!cand.accepted) {
            if (cand.rejection == "degenerate split")
                ++diag.degenerate_rejections;
            else
                ++diag.gate_rejections;
            continue;
        }

        // Recover the candidate's training indices for overlap diagnostics.
        Rng split_rng(derive_seed(candidate_seed, "split"));
        std::vector<int> order(static_cast<size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), split_rng);
        const int n_train = std::max(2, static_cast<int>(std::lround(params.alpha_train * n)));
        std::vector<int> train_split(order.begin(), order.begin() + n_train);
        std::sort(train_split.begin(), train_split.end());

        bool independent = true;
        for (const auto& member : result.model.members) {
            const std::vector<int> d_it = sample_indices(n, it_size, rng);
            overlap_sum += overlap_fraction(d_it, train_split);
            ++overlap_count;
            if (!independence_test(member, *cand.accepted, cache, d_it, params.theta_it)) {
                independent = false;
                break;
            }
        }
        if (!independent) {
            ++diag.it_rejections;
            continue;
        }

        result.model.members.push_back(std::move(*cand.accepted));
        member_train_splits.push_back(std::move(train_split));
    }

    if (overlap_count > 0) diag.mean_it_train_overlap = overlap_sum / overlap_count;

    if (result.model.size() != params.T) {
        std::ostringstream msg;
        msg << "build_ensemble: only " << result.model.size() << "/" << params.T
            << " members after " << diag.draws << " draws (gate rejections "
            << diag.gate_rejections << ", IT rejections " << diag.it_rejections
            << ", degenerate " << diag.degenerate_rejections << ")";
        throw EnsembleBuildError(msg.str(), std::move(result.model), diag);
    }
    return result;
}

Labels ensemble_predict_all(const EnsembleModel& m, FeatureCache& cache) {
    if (m.members.empty() || m.members.size() % 2 == 0)
        throw std::invalid_argument("ensemble_predict_all: member count must be odd");
    const auto n = cache.n_samples();
    Eigen::VectorXi sums = Eigen::VectorXi::Zero(n);
    for (const auto& member : m.members) {
        const FeatureMatrix& features = cache.matrix(member.feature);
        for (Eigen::Index i = 0; i < n; ++i) sums[i] += member.model->predict(features.row(i));
    }
    Labels out(n);
    for (Eigen::Index i = 0; i < n; ++i) out[i] = sums[i] > 0 ? +1 : -1;
    return out;
}

}  // namespace bottlescan
