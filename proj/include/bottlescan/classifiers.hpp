#pragma once

#include <memory>
#include <string>
#include <vector>

#include "bottlescan/features.hpp"
#include "bottlescan/rng.hpp"
#include "bottlescan/serialize.hpp"

namespace bottlescan {

// Training data: one sample per row, labels in {-1, +1}.
using FeatureMatrix = Eigen::MatrixXd;
using Labels = Eigen::VectorXi;

enum class Family { RF, GBDT, SVM, KNN };

std::string to_string(Family family);
Family family_from_string(const std::string& s);

struct ClassifierConfig {
    Family family = Family::RF;
    std::uint64_t seed = 0;

    // RF
    int rf_trees = 31;
    int rf_max_depth = 12;
    double rf_feature_fraction = 0.0;  // 0 -> sqrt(dim)/dim

    // GBDT
    int gbdt_rounds = 100;
    double gbdt_learning_rate = 0.1;
    int gbdt_depth = 3;
    double gbdt_feature_fraction = 0.0;  // 0 -> sqrt(dim)/dim

    // SVM (linear kernel, primal hinge-loss SGD)
    double svm_c = 1.0;
    int svm_epochs = 50;

    // KNN (Euclidean)
    int knn_k = 5;

    void validate() const;
    std::string name() const;
};

// Trained model behind the shared train/predict contract; outputs are
// always exactly +-1.
class Classifier {
public:
    virtual ~Classifier() = default;

    int predict(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    Labels predict_many(const FeatureMatrix& xs) const;

    Eigen::Index feature_dim() const { return dim_; }
    const ClassifierConfig& config() const { return cfg_; }

    void save(BinaryWriter& w) const;
    static std::unique_ptr<Classifier> load(BinaryReader& r);

protected:
    Classifier(ClassifierConfig cfg, Eigen::Index dim) : cfg_(std::move(cfg)), dim_(dim) {}
    virtual int predict_impl(const Eigen::Ref<const Eigen::VectorXd>& x) const = 0;
    virtual void save_model(BinaryWriter& w) const = 0;

    ClassifierConfig cfg_;
    Eigen::Index dim_ = 0;
};

// Deterministic given cfg; throws on single-class data or ragged dimensions.
std::unique_ptr<Classifier> fit(const ClassifierConfig& cfg, const FeatureMatrix& xs,
                                const Labels& ys);

}  // namespace bottlescan
