#include "bottlescan/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bottlescan {

std::string to_string(Family family) {
    switch (family) {
        case Family::RF: return "rf";
        case Family::GBDT: return "gbdt";
        case Family::SVM: return "svm";
        case Family::KNN: return "knn";
    }
    throw std::logic_error("unknown family");
}

Family family_from_string(const std::string& s) {
    if (s == "rf") return Family::RF;
    if (s == "gbdt") return Family::GBDT;
    if (s == "svm") return Family::SVM;
    if (s == "knn") return Family::KNN;
    throw std::invalid_argument("unknown classifier family: " + s);
}

void ClassifierConfig::validate() const {
    switch (family) {
        case Family::RF:
            if (rf_trees < 1 || rf_trees % 2 == 0)
                throw std::invalid_argument("rf: n_trees must be odd and positive");
            if (rf_max_depth < 1) throw std::invalid_argument("rf: max_depth < 1");
            if (rf_feature_fraction < 0.0 || rf_feature_fraction > 1.0)
                throw std::invalid_argument("rf: feature fraction outside [0,1]");
            break;
        case Family::GBDT:
            if (gbdt_rounds < 1) throw std::invalid_argument("gbdt: n_rounds < 1");
            if (gbdt_learning_rate <= 0.0) throw std::invalid_argument("gbdt: learning rate <= 0");
            if (gbdt_depth < 1) throw std::invalid_argument("gbdt: depth < 1");
            break;
        case Family::SVM:
            if (svm_c <= 0.0) throw std::invalid_argument("svm: C <= 0");
            if (svm_epochs < 1) throw std::invalid_argument("svm: epochs < 1");
            break;
        case Family::KNN:
            if (knn_k < 1 || knn_k % 2 == 0)
                throw std::invalid_argument("knn: k must be odd and positive");
            break;
    }
}

std::string ClassifierConfig::name() const {
    switch (family) {
        case Family::RF:
            return "rf:" + std::to_string(rf_trees) + "x" + std::to_string(rf_max_depth);
        case Family::GBDT:
            return "gbdt:" + std::to_string(gbdt_rounds) + "x" + std::to_string(gbdt_depth);
        case Family::SVM: return "svm:C=" + std::to_string(svm_c);
        case Family::KNN: return "knn:k=" + std::to_string(knn_k);
    }
    throw std::logic_error("unknown family");
}

namespace {

// ---------------------------------------------------------------- trees

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;

    double predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
        int idx = 0;
        while (nodes[static_cast<size_t>(idx)].feature >= 0) {
            const auto& n = nodes[static_cast<size_t>(idx)];
            idx = x[n.feature] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<size_t>(idx)].value;
    }
};

struct TreeTrainer {
    const FeatureMatrix& xs;
    const Eigen::VectorXd& targets;
    int max_depth;
    int n_try_features;
    Rng& rng;
    Tree tree;
    std::vector<int> feature_pool;

    TreeTrainer(const FeatureMatrix& xs_, const Eigen::VectorXd& targets_, int max_depth_,
                int n_try, Rng& rng_)
        : xs(xs_), targets(targets_), max_depth(max_depth_), n_try_features(n_try), rng(rng_) {
        feature_pool.resize(static_cast<size_t>(xs.cols()));
        std::iota(feature_pool.begin(), feature_pool.end(), 0);
    }

    int build(std::vector<int>& idx, int begin, int end, int depth) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        const int n = end - begin;
        double sum = 0.0;
        for (int i = begin; i < end; ++i) sum += targets[idx[static_cast<size_t>(i)]];
        tree.nodes[static_cast<size_t>(node_id)].value = sum / n;

        if (depth >= max_depth || n < 2) return node_id;

        // Splits maximize sum_L^2/n_L + sum_R^2/n_R (variance reduction);
        // on +-1 targets this coincides with the Gini criterion.
        double best_gain = sum * sum / n + 1e-12;
        int best_feature = -1;
        double best_threshold = 0.0;

        // Partial Fisher-Yates draw of candidate features.
        for (int t = 0; t < n_try_features; ++t) {
            std::uniform_int_distribution<int> pick(t, static_cast<int>(feature_pool.size()) - 1);
            std::swap(feature_pool[static_cast<size_t>(t)],
                      feature_pool[static_cast<size_t>(pick(rng))]);
        }

        std::vector<std::pair<double, double>> col(static_cast<size_t>(n));
        for (int t = 0; t < n_try_features; ++t) {
            const int f = feature_pool[static_cast<size_t>(t)];
            for (int i = 0; i < n; ++i) {
                const int s = idx[static_cast<size_t>(begin + i)];
                col[static_cast<size_t>(i)] = {xs(s, f), targets[s]};
            }
            std::sort(col.begin(), col.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            double left_sum = 0.0;
            for (int i = 0; i < n - 1; ++i) {
                left_sum += col[static_cast<size_t>(i)].second;
                if (col[static_cast<size_t>(i)].first == col[static_cast<size_t>(i + 1)].first)
                    continue;
                const int nl = i + 1;
                const int nr = n - nl;
                const double right_sum = sum - left_sum;
                const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = 0.5 * (col[static_cast<size_t>(i)].first +
                                            col[static_cast<size_t>(i + 1)].first);
                }
            }
        }

        if (best_feature < 0) return node_id;

        const auto mid_it =
            std::partition(idx.begin() + begin, idx.begin() + end, [&](int s) {
                return xs(s, best_feature) <= best_threshold;
            });
        const int mid = static_cast<int>(mid_it - idx.begin());
        if (mid == begin || mid == end) return node_id;  // numerically degenerate split

        tree.nodes[static_cast<size_t>(node_id)].feature = best_feature;
        tree.nodes[static_cast<size_t>(node_id)].threshold = best_threshold;
        const int left = build(idx, begin, mid, depth + 1);
        tree.nodes[static_cast<size_t>(node_id)].left = left;
        const int right = build(idx, mid, end, depth + 1);
        tree.nodes[static_cast<size_t>(node_id)].right = right;
        return node_id;
    }
};

Tree train_tree(const FeatureMatrix& xs, const Eigen::VectorXd& targets, std::vector<int> idx,
                int max_depth, int n_try_features, Rng& rng) {
    TreeTrainer trainer(xs, targets, max_depth, n_try_features, rng);
    trainer.build(idx, 0, static_cast<int>(idx.size()), 0);
    return std::move(trainer.tree);
}

int resolve_try_count(double fraction, Eigen::Index dim) {
    if (fraction <= 0.0)
        return std::max(1, static_cast<int>(std::lround(std::sqrt(static_cast<double>(dim)))));
    return std::max(1, static_cast<int>(std::lround(fraction * static_cast<double>(dim))));
}

void save_tree(BinaryWriter& w, const Tree& t) {
    w.u64(t.nodes.size());
    for (const auto& n : t.nodes) {
        w.i32(n.feature);
        w.f64(n.threshold);
        w.i32(n.left);
        w.i32(n.right);
        w.f64(n.value);
    }
}

Tree load_tree(BinaryReader& r) {
    Tree t;
    t.nodes.resize(r.u64());
    for (auto& n : t.nodes) {
        n.feature = r.i32();
        n.threshold = r.f64();
        n.left = r.i32();
        n.right = r.i32();
        n.value = r.f64();
    }
    return t;
}

int sign_label(double score) { return score < 0.0 ? -1 : +1; }

// ---------------------------------------------------------------- models

class RandomForest final : public Classifier {
public:
    RandomForest(ClassifierConfig cfg, Eigen::Index dim, std::vector<Tree> trees)
        : Classifier(std::move(cfg), dim), trees_(std::move(trees)) {}

    static std::unique_ptr<RandomForest> train(const ClassifierConfig& cfg,
                                               const FeatureMatrix& xs, const Labels& ys) {
        Rng rng(cfg.seed);
        const int n = static_cast<int>(xs.rows());
        const int n_try = resolve_try_count(cfg.rf_feature_fraction, xs.cols());
        const Eigen::VectorXd targets = ys.cast<double>();
        std::uniform_int_distribution<int> pick(0, n - 1);

        std::vector<Tree> trees;
        trees.reserve(static_cast<size_t>(cfg.rf_trees));
        for (int t = 0; t < cfg.rf_trees; ++t) {
            std::vector<int> bootstrap(static_cast<size_t>(n));
            for (auto& s : bootstrap) s = pick(rng);
            trees.push_back(train_tree(xs, targets, std::move(bootstrap), cfg.rf_max_depth,
                                       n_try, rng));
        }
        return std::make_unique<RandomForest>(cfg, xs.cols(), std::move(trees));
    }

private:
    int predict_impl(const Eigen::Ref<const Eigen::VectorXd>& x) const override {
        int vote = 0;
        for (const auto& t : trees_) vote += sign_label(t.predict(x));
        return sign_label(vote);
    }
    void save_model(BinaryWriter& w) const override {
        w.u32(static_cast<std::uint32_t>(trees_.size()));
        for (const auto& t : trees_) save_tree(w, t);
    }

    std::vector<Tree> trees_;
};

class GradientBoost final : public Classifier {
public:
    GradientBoost(ClassifierConfig cfg, Eigen::Index dim, double base, std::vector<Tree> trees)
        : Classifier(std::move(cfg), dim), base_(base), trees_(std::move(trees)) {}

    static std::unique_ptr<GradientBoost> train(const ClassifierConfig& cfg,
                                                const FeatureMatrix& xs, const Labels& ys) {
        Rng rng(cfg.seed);
        const int n = static_cast<int>(xs.rows());
        const int n_try = resolve_try_count(cfg.gbdt_feature_fraction, xs.cols());
        const Eigen::VectorXd targets = ys.cast<double>();
        const double base = targets.mean();

        Eigen::VectorXd score = Eigen::VectorXd::Constant(n, base);
        std::vector<int> all(static_cast<size_t>(n));
        std::iota(all.begin(), all.end(), 0);

        std::vector<Tree> trees;
        trees.reserve(static_cast<size_t>(cfg.gbdt_rounds));
        for (int round = 0; round < cfg.gbdt_rounds; ++round) {
            const Eigen::VectorXd residual = targets - score;
            Tree t = train_tree(xs, residual, all, cfg.gbdt_depth, n_try, rng);
            for (int i = 0; i < n; ++i)
                score[i] += cfg.gbdt_learning_rate * t.predict(xs.row(i));
            trees.push_back(std::move(t));
        }
        return std::make_unique<GradientBoost>(cfg, xs.cols(), base, std::move(trees));
    }

private:
    int predict_impl(const Eigen::Ref<const Eigen::VectorXd>& x) const override {
        double score = base_;
        for (const auto& t : trees_) score += cfg_.gbdt_learning_rate * t.predict(x);
        return sign_label(score);
    }
    void save_model(BinaryWriter& w) const override {
        w.f64(base_);
        w.u32(static_cast<std::uint32_t>(trees_.size()));
        for (const auto& t : trees_) save_tree(w, t);
    }

    double base_;
    std::vector<Tree> trees_;
};

class LinearSvm final : public Classifier {
public:
    LinearSvm(ClassifierConfig cfg, Eigen::Index dim, Eigen::VectorXd w, double b,
              Eigen::VectorXd mean, Eigen::VectorXd inv_std)
        : Classifier(std::move(cfg), dim),
          w_(std::move(w)),
          b_(b),
          mean_(std::move(mean)),
          inv_std_(std::move(inv_std)) {}

    static std::unique_ptr<LinearSvm> train(const ClassifierConfig& cfg, const FeatureMatrix& xs,
                                            const Labels& ys) {
        Rng rng(cfg.seed);
        const int n = static_cast<int>(xs.rows());
        const auto dim = xs.cols();

        // Per-feature standardization. The per-feature scale is floored at a
        // fraction of the largest scale so near-constant noisy columns are not
        // blown up into dominant directions; exactly constant columns pass
        // through unscaled.
        Eigen::VectorXd mean = xs.colwise().mean();
        Eigen::VectorXd var =
            (xs.rowwise() - mean.transpose()).array().square().colwise().mean();
        const double floor_std = 1e-2 * std::sqrt(var.maxCoeff());
        Eigen::VectorXd inv_std(dim);
        for (Eigen::Index j = 0; j < dim; ++j) {
            const double sd = std::max(std::sqrt(var[j]), floor_std);
            inv_std[j] = sd > 0.0 ? 1.0 / sd : 1.0;
        }

        FeatureMatrix z = (xs.rowwise() - mean.transpose()) * inv_std.asDiagonal();

        // Pegasos-style primal SGD on the hinge loss with the standard
        // projection onto the ||w|| <= 1/sqrt(lambda) ball. The returned
        // model averages only the second half of the trajectory: early
        // iterates are far from the optimum and would otherwise drag the
        // whole-run average off target on small training sets.
        const double lambda = 1.0 / (cfg.svm_c * n);
        const double radius = 1.0 / std::sqrt(lambda);
        Eigen::VectorXd w = Eigen::VectorXd::Zero(dim);
        double b = 0.0;
        Eigen::VectorXd w_sum = Eigen::VectorXd::Zero(dim);
        double b_sum = 0.0;
        std::vector<int> order(static_cast<size_t>(n));
        std::iota(order.begin(), order.end(), 0);

        const long total = static_cast<long>(cfg.svm_epochs) * n;
        const long tail_start = total / 2;
        long t = 0, averaged = 0;
        for (int epoch = 0; epoch < cfg.svm_epochs; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            for (int s : order) {
                ++t;
                const double eta = 1.0 / (lambda * static_cast<double>(t));
                const double y = ys[s];
                const double margin = y * (w.dot(z.row(s)) + b);
                w *= (1.0 - eta * lambda);
                if (margin < 1.0) {
                    w += eta * y * z.row(s).transpose();
                    b += eta * y;
                }
                const double norm = std::sqrt(w.squaredNorm() + b * b);
                if (norm > radius) {
                    const double shrink = radius / norm;
                    w *= shrink;
                    b *= shrink;
                }
                if (t > tail_start) {
                    w_sum += w;
                    b_sum += b;
                    ++averaged;
                }
            }
        }
        w_sum /= static_cast<double>(averaged);
        b_sum /= static_cast<double>(averaged);
        return std::make_unique<LinearSvm>(cfg, dim, std::move(w_sum), b_sum, std::move(mean),
                                           std::move(inv_std));
    }

private:
    int predict_impl(const Eigen::Ref<const Eigen::VectorXd>& x) const override {
        const double score = w_.dot((x - mean_).cwiseProduct(inv_std_)) + b_;
        return sign_label(score);
    }
    void save_model(BinaryWriter& w) const override {
        w.vec(w_);
        w.f64(b_);
        w.vec(mean_);
        w.vec(inv_std_);
    }

    Eigen::VectorXd w_;
    double b_;
    Eigen::VectorXd mean_;
    Eigen::VectorXd inv_std_;
};

class NearestNeighbors final : public Classifier {
public:
    NearestNeighbors(ClassifierConfig cfg, FeatureMatrix xs, Labels ys)
        : Classifier(std::move(cfg), xs.cols()),
          xs_(std::move(xs)),
          ys_(std::move(ys)),
          row_norms_(xs_.rowwise().squaredNorm()) {}

private:
    int predict_impl(const Eigen::Ref<const Eigen::VectorXd>& x) const override {
        const Eigen::VectorXd dots = xs_ * x;
        const double xn = x.squaredNorm();
        const int n = static_cast<int>(xs_.rows());
        const int k = std::min(cfg_.knn_k, n);

        std::vector<int> idx(static_cast<size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        // Distance ties resolve to the lower sample index.
        auto closer = [&](int a, int b) {
            const double da = row_norms_[a] - 2.0 * dots[a] + xn;
            const double db = row_norms_[b] - 2.0 * dots[b] + xn;
            return da < db || (da == db && a < b);
        };
        std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), closer);

        int vote = 0;
        for (int i = 0; i < k; ++i) vote += ys_[idx[static_cast<size_t>(i)]];
        return sign_label(vote);
    }
    void save_model(BinaryWriter& w) const override {
        w.mat(xs_);
        w.veci(ys_);
    }

    FeatureMatrix xs_;
    Labels ys_;
    Eigen::VectorXd row_norms_;
};

void save_config(BinaryWriter& w, const ClassifierConfig& cfg) {
    w.str(to_string(cfg.family));
    w.u64(cfg.seed);
    w.i32(cfg.rf_trees);
    w.i32(cfg.rf_max_depth);
    w.f64(cfg.rf_feature_fraction);
    w.i32(cfg.gbdt_rounds);
    w.f64(cfg.gbdt_learning_rate);
    w.i32(cfg.gbdt_depth);
    w.f64(cfg.gbdt_feature_fraction);
    w.f64(cfg.svm_c);
    w.i32(cfg.svm_epochs);
    w.i32(cfg.knn_k);
}

ClassifierConfig load_config(BinaryReader& r) {
    ClassifierConfig cfg;
    cfg.family = family_from_string(r.str());
    cfg.seed = r.u64();
    cfg.rf_trees = r.i32();
    cfg.rf_max_depth = r.i32();
    cfg.rf_feature_fraction = r.f64();
    cfg.gbdt_rounds = r.i32();
    cfg.gbdt_learning_rate = r.f64();
    cfg.gbdt_depth = r.i32();
    cfg.gbdt_feature_fraction = r.f64();
    cfg.svm_c = r.f64();
    cfg.svm_epochs = r.i32();
    cfg.knn_k = r.i32();
    return cfg;
}

std::unique_ptr<Classifier> load_classifier_model(BinaryReader& r, ClassifierConfig cfg,
                                                  Eigen::Index dim) {
    switch (cfg.family) {
        case Family::RF: {
            std::vector<Tree> trees(r.u32());
            for (auto& t : trees) t = load_tree(r);
            return std::make_unique<RandomForest>(std::move(cfg), dim, std::move(trees));
        }
        case Family::GBDT: {
            const double base = r.f64();
            std::vector<Tree> trees(r.u32());
            for (auto& t : trees) t = load_tree(r);
            return std::make_unique<GradientBoost>(std::move(cfg), dim, base, std::move(trees));
        }
        case Family::SVM: {
            Eigen::VectorXd w = r.vec();
            const double b = r.f64();
            Eigen::VectorXd mean = r.vec();
            Eigen::VectorXd inv_std = r.vec();
            return std::make_unique<LinearSvm>(std::move(cfg), dim, std::move(w), b,
                                               std::move(mean), std::move(inv_std));
        }
        case Family::KNN: {
            FeatureMatrix xs = r.mat();
            Labels ys = r.veci();
            return std::make_unique<NearestNeighbors>(std::move(cfg), std::move(xs),
                                                      std::move(ys));
        }
    }
    throw std::logic_error("unknown family");
}

}  // namespace

int Classifier::predict(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    if (x.size() != dim_)
        throw std::invalid_argument("predict: feature dim " + std::to_string(x.size()) +
                                    " != expected " + std::to_string(dim_));
    return predict_impl(x);
}

Labels Classifier::predict_many(const FeatureMatrix& xs) const {
    Labels out(xs.rows());
    for (Eigen::Index i = 0; i < xs.rows(); ++i) out[i] = predict(xs.row(i));
    return out;
}

void Classifier::save(BinaryWriter& w) const {
    save_config(w, cfg_);
    w.u64(static_cast<std::uint64_t>(dim_));
    save_model(w);
}

std::unique_ptr<Classifier> Classifier::load(BinaryReader& r) {
    ClassifierConfig cfg = load_config(r);
    const auto dim = static_cast<Eigen::Index>(r.u64());
    return load_classifier_model(r, std::move(cfg), dim);
}

std::unique_ptr<Classifier> fit(const ClassifierConfig& cfg, const FeatureMatrix& xs,
                                const Labels& ys) {
    cfg.validate();
    if (xs.rows() != ys.size() || xs.rows() < 2)
        throw std::invalid_argument("fit: need at least 2 samples with matching labels");
    bool has_pos = false, has_neg = false;
    for (Eigen::Index i = 0; i < ys.size(); ++i) {
        if (ys[i] == +1)
            has_pos = true;
        else if (ys[i] == -1)
            has_neg = true;
        else
            throw std::invalid_argument("fit: labels must be -1 or +1");
    }
    if (!has_pos || !has_neg) throw std::invalid_argument("degenerate training set");

    switch (cfg.family) {
        case Family::RF: return RandomForest::train(cfg, xs, ys);
        case Family::GBDT: return GradientBoost::train(cfg, xs, ys);
        case Family::SVM: return LinearSvm::train(cfg, xs, ys);
        case Family::KNN: return std::make_unique<NearestNeighbors>(cfg, xs, ys);
    }
    throw std::logic_error("unknown family");
}

}  // namespace bottlescan
