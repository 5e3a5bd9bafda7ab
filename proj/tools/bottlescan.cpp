#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "bottlescan/pipeline.hpp"

namespace fs = std::filesystem;
using namespace bottlescan;

namespace {

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "pipeline config JSON");
    cmd->add_option("--seed", args.seed, "master seed")->each([&](const std::string&) {
        args.seed_set = true;
    });
    cmd->add_option("--out", args.out_dir, "output directory");
}

PipelineConfig load_config(const CommonArgs& args) {
    PipelineConfig cfg;
    if (!args.config_path.empty()) cfg = PipelineConfig::from_json_file(args.config_path);
    if (args.seed_set) cfg.ensemble.seed = args.seed;
    return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

int run(int argc, char** argv) {
    CLI::App app{"Bottle inspection pipeline"};
    app.require_subcommand(1);

    CommonArgs args;

    auto* gen = app.add_subcommand("gen", "synthesize a labeled dataset");
    int gen_n = 1000;
    double gen_fraction = 0.5;
    add_common(gen, args);
    gen->add_option("--n", gen_n, "number of images");
    gen->add_option("--defective-fraction", gen_fraction, "defective fraction");

    auto* train = app.add_subcommand("train", "build an ensemble model");
    add_common(train, args);
    std::string train_manifest;
    train->add_option("--manifest", train_manifest, "dataset manifest path");

    auto* eval = app.add_subcommand("eval", "evaluate a model against a manifest");
    add_common(eval, args);
    std::string eval_manifest, eval_model;
    eval->add_option("--manifest", eval_manifest, "dataset manifest path")->required();
    eval->add_option("--model", eval_model, "model artifact path");

    auto* inspect = app.add_subcommand("inspect", "run the trigger loop over a stream");
    add_common(inspect, args);
    std::string inspect_model;
    int inspect_frames = 120, inspect_bottles = 3;
    inspect->add_option("--model", inspect_model, "model artifact path");
    inspect->add_option("--frames", inspect_frames, "stream length");
    inspect->add_option("--bottles", inspect_bottles, "bottles crossing the stream");

    auto* curve = app.add_subcommand("curve", "analytic ensemble precision grid");
    add_common(curve, args);

    auto* sweep_features_cmd = app.add_subcommand("sweep-features", "feature parameter sweep");
    add_common(sweep_features_cmd, args);
    int sf_n = 600;

    sweep_features_cmd->add_option("--n", sf_n, "dataset size for the sweep");

    auto* sweep_t_cmd = app.add_subcommand("sweep-t", "ensemble size sweep");
    add_common(sweep_t_cmd, args);
    int st_train = 1200, st_test = 600;
    sweep_t_cmd->add_option("--n-train", st_train, "training dataset size");
    sweep_t_cmd->add_option("--n-test", st_test, "test dataset size");

    auto* sweep_noise_cmd = app.add_subcommand("sweep-noise", "label-noise robustness sweep");
    add_common(sweep_noise_cmd, args);
    int sn_train = 1200, sn_test = 600;
    sweep_noise_cmd->add_option("--n-train", sn_train, "training dataset size");
    sweep_noise_cmd->add_option("--n-test", sn_test, "test dataset size");

    CLI11_PARSE(app, argc, argv);

    PipelineConfig cfg = load_config(args);
    const fs::path out_dir = args.out_dir;
    fs::create_directories(out_dir);
    const std::uint64_t seed = cfg.ensemble.seed;

    if (gen->parsed()) {
        const LabeledDataset data = gen_dataset(cfg.scene, gen_n, gen_fraction, seed);
        const fs::path dir =
            cfg.dataset_path.empty() ? out_dir / "dataset" : cfg.dataset_path;
        data.save(dir);
        std::cout << "OK gen n=" << data.size() << " defective=" << data.count_label(-1)
                  << " manifest=" << (dir / "manifest.txt").string() << " seed=" << seed
                  << "\n";
        return 0;
    }

    if (train->parsed()) {
        LabeledDataset data;
        if (!train_manifest.empty())
            data = LabeledDataset::load(train_manifest);
        else if (!cfg.dataset_path.empty())
            data = LabeledDataset::load(cfg.dataset_path / "manifest.txt");
        else
            data = gen_dataset(cfg.scene, 2000, 0.5, derive_seed(seed, "train-data"));
        const LabeledDataset normalized = normalize_dataset(data, cfg.lambda_avg);
        FeatureCache cache(normalized);
        const BuildResult built = build_ensemble(cache, cfg.default_pool(), cfg.ensemble);
        const fs::path model_path =
            cfg.model_path.empty() ? out_dir / "ensemble.model" : cfg.model_path;
        built.model.save_file(model_path);
        std::cout << "OK train members=" << built.model.size()
                  << " draws=" << built.diagnostics.draws
                  << " it_rejections=" << built.diagnostics.it_rejections
                  << " model=" << model_path.string() << " seed=" << seed << "\n";
        return 0;
    }

    if (eval->parsed()) {
        const fs::path model_path =
            !eval_model.empty() ? fs::path(eval_model)
                                : (cfg.model_path.empty() ? out_dir / "ensemble.model"
                                                          : cfg.model_path);
        const EnsembleModel model = EnsembleModel::load_file(model_path);
        const LabeledDataset data =
            normalize_dataset(LabeledDataset::load(eval_manifest), cfg.lambda_avg);
        FeatureCache cache(data);
        const Metrics m = evaluate(model, cache);
        std::cout << "OK eval n=" << m.n_total << " fp=" << m.n_fp << " fn=" << m.n_fn
                  << " fp_rate=" << m.fp_rate << " fn_rate=" << m.fn_rate
                  << " error_rate=" << m.error_rate << " precision=" << m.precision
                  << " seed=" << seed << "\n";
        return 0;
    }

    if (inspect->parsed()) {
        const fs::path model_path =
            !inspect_model.empty() ? fs::path(inspect_model)
                                   : (cfg.model_path.empty() ? out_dir / "ensemble.model"
                                                             : cfg.model_path);
        const EnsembleModel model = EnsembleModel::load_file(model_path);

        std::vector<int> starts;
        const int gap = inspect_bottles > 0
                            ? std::max(14, (inspect_frames - 20) / std::max(1, inspect_bottles))
                            : 0;
        for (int b = 0; b < inspect_bottles; ++b)
            starts.push_back(cfg.trigger.n_background_frames + 4 + b * gap);
        const auto schedule = bottle_crossing_schedule(inspect_frames, starts);
        const StreamResult stream =
            gen_stream(cfg.scene, schedule, derive_seed(seed, "inspect-stream"));

        const auto events = run_inspection(stream.frames, model, cfg);
        std::ostringstream log;
        log << "frame_index,verdict,skipped,votes\n";
        for (const auto& e : events) {
            log << e.frame_index << "," << e.verdict << "," << (e.skipped ? 1 : 0) << ",";
            for (size_t i = 0; i < e.votes.size(); ++i)
                log << (i ? " " : "") << e.votes[i];
            log << "\n";
        }
        write_text(out_dir / "inspection_events.csv", log.str());
        std::cout << "OK inspect frames=" << stream.frames.size() << " events=" << events.size()
                  << " log=" << (out_dir / "inspection_events.csv").string() << " seed=" << seed
                  << "\n";
        return 0;
    }

    if (curve->parsed()) {
        const std::vector<double> epsilons{0.05, 0.10, 0.15, 0.20, 0.25,
                                           0.30, 0.35, 0.40, 0.45, 0.50};
        const std::vector<int> Ts{1, 3, 5, 7, 9, 11};
        write_text(out_dir / "precision_curve.csv", precision_curve_csv(epsilons, Ts));
        std::cout << "OK curve rows=" << epsilons.size() * Ts.size()
                  << " report=" << (out_dir / "precision_curve.csv").string() << " seed=" << seed
                  << "\n";
        return 0;
    }

    if (sweep_features_cmd->parsed()) {
        const LabeledDataset data = normalize_dataset(
            gen_dataset(cfg.scene, sf_n, 0.5, derive_seed(seed, "sweep-data")), cfg.lambda_avg);
        FeatureCache cache(data);
        std::vector<FeatureSpec> variants;
        for (int g = 5; g <= 13; g += 2)
            variants.push_back({FeatureKind::BHoG, g, g, cfg.bhog_spec.n_bins, 1.0});
        for (int g = 6; g <= 14; g += 2)
            variants.push_back({FeatureKind::BGH, g, g, cfg.bgh_spec.n_bins, 1.0});
        for (double s : {0.2, 0.4, 0.6, 0.8, 1.0})
            variants.push_back({FeatureKind::Raw, 1, 1, 2, s});
        const std::vector<Family> families{Family::RF, Family::GBDT, Family::SVM, Family::KNN};
        write_text(out_dir / "sweep_features.csv",
                   sweep_feature_params(cache, variants, families, cfg.ensemble));
        std::cout << "OK sweep-features cells=" << variants.size() * families.size()
                  << " report=" << (out_dir / "sweep_features.csv").string() << " seed=" << seed
                  << "\n";
        return 0;
    }

    if (sweep_t_cmd->parsed()) {
        const LabeledDataset train_data = normalize_dataset(
            gen_dataset(cfg.scene, st_train, 0.5, derive_seed(seed, "sweep-train")),
            cfg.lambda_avg);
        const LabeledDataset test_data = normalize_dataset(
            gen_dataset(cfg.scene, st_test, 0.5, derive_seed(seed, "sweep-test")),
            cfg.lambda_avg);
        FeatureCache train_cache(train_data);
        FeatureCache test_cache(test_data);
        const std::vector<int> Ts{1, 3, 5, 7};
        write_text(out_dir / "sweep_t.csv",
                   sweep_T(train_cache, test_cache, cfg.default_pool(), Ts, cfg.ensemble));
        std::cout << "OK sweep-t rows=" << Ts.size()
                  << " report=" << (out_dir / "sweep_t.csv").string() << " seed=" << seed << "\n";
        return 0;
    }

    if (sweep_noise_cmd->parsed()) {
        const LabeledDataset train_data = normalize_dataset(
            gen_dataset(cfg.scene, sn_train, 0.5, derive_seed(seed, "noise-train")),
            cfg.lambda_avg);
        const LabeledDataset test_data = normalize_dataset(
            gen_dataset(cfg.scene, sn_test, 0.5, derive_seed(seed, "noise-test")),
            cfg.lambda_avg);
        FeatureCache test_cache(test_data);
        const std::vector<double> ratios{0.0, 0.08, 0.16, 0.32, 0.48};
        write_text(out_dir / "sweep_noise.csv",
                   sweep_label_noise(train_data, test_cache, cfg.default_pool(), ratios,
                                     cfg.ensemble));
        std::cout << "OK sweep-noise rows=" << ratios.size()
                  << " report=" << (out_dir / "sweep_noise.csv").string() << " seed=" << seed
                  << "\n";
        return 0;
    }

    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
}
