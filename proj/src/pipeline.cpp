#include "bottlescan/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace bottlescan {

using nlohmann::json;

namespace {

void require_known_keys(const json& obj, std::initializer_list<const char*> known,
                        const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) ok = true;
        if (!ok) throw std::invalid_argument("config: unknown key \"" + key + "\" in " + where);
    }
}

Patch patch_from_json(const json& arr, const std::string& where) {
    if (!arr.is_array() || arr.size() != 4)
        throw std::invalid_argument("config: " + where + " must be [x,y,w,h]");
    return {arr[0].get<int>(), arr[1].get<int>(), arr[2].get<int>(), arr[3].get<int>()};
}

json patch_to_json(const Patch& p) { return json::array({p.x, p.y, p.w, p.h}); }

std::string fmt(double v) {
    std::ostringstream out;
    out << std::setprecision(12) << v;
    return out.str();
}

}  // namespace

CandidatePool PipelineConfig::default_pool() const {
    CandidatePool pool;
    for (Family family : {Family::RF, Family::GBDT, Family::SVM, Family::KNN})
        for (const FeatureSpec& spec : {bhog_spec, bgh_spec, raw_spec}) {
            ClassifierConfig cfg;
            cfg.family = family;
            pool.emplace_back(cfg, spec);
        }
    return pool;
}

void PipelineConfig::validate() const {
    trigger.validate();
    if (!(lambda_avg > 0.0 && lambda_avg < 1.0))
        throw std::invalid_argument("config: lambda_avg outside (0,1)");
    bhog_spec.validate();
    bgh_spec.validate();
    raw_spec.validate();
    ensemble.validate();
    scene.validate();
}

PipelineConfig PipelineConfig::from_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str());
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text) {
    json root = json::parse(text);
    PipelineConfig cfg;
    require_known_keys(root, {"trigger", "roi", "lambda_avg", "features", "ensemble", "scene",
                              "paths"},
                       "config root");

    if (root.contains("trigger")) {
        const json& t = root["trigger"];
        require_known_keys(t, {"patches", "theta_thres", "n_background_frames"}, "trigger");
        if (t.contains("patches")) {
            cfg.trigger.patches.clear();
            for (const auto& p : t["patches"])
                cfg.trigger.patches.push_back(patch_from_json(p, "trigger.patches"));
        }
        if (t.contains("theta_thres")) cfg.trigger.theta_thres = t["theta_thres"].get<double>();
        if (t.contains("n_background_frames"))
            cfg.trigger.n_background_frames = t["n_background_frames"].get<int>();
    }
    if (root.contains("roi")) cfg.roi = patch_from_json(root["roi"], "roi");
    if (root.contains("lambda_avg")) cfg.lambda_avg = root["lambda_avg"].get<double>();

    if (root.contains("features")) {
        const json& f = root["features"];
        require_known_keys(f, {"bhog", "bgh", "raw"}, "features");
        auto grid = [](const json& o, FeatureSpec& spec, const std::string& where) {
            require_known_keys(o, {"rows", "cols", "n_bins"}, where);
            if (o.contains("rows")) spec.rows = o["rows"].get<int>();
            if (o.contains("cols")) spec.cols = o["cols"].get<int>();
            if (o.contains("n_bins")) spec.n_bins = o["n_bins"].get<int>();
        };
        if (f.contains("bhog")) grid(f["bhog"], cfg.bhog_spec, "features.bhog");
        if (f.contains("bgh")) grid(f["bgh"], cfg.bgh_spec, "features.bgh");
        if (f.contains("raw")) {
            require_known_keys(f["raw"], {"scale"}, "features.raw");
            if (f["raw"].contains("scale")) cfg.raw_spec.scale = f["raw"]["scale"].get<double>();
        }
    }

    if (root.contains("ensemble")) {
        const json& e = root["ensemble"];
        require_known_keys(e,
                           {"T", "theta_it", "delta_low", "delta_up", "alpha_train",
                            "alpha_test", "beta", "n_max_pool", "seed", "min_it_samples"},
                           "ensemble");
        if (e.contains("T")) cfg.ensemble.T = e["T"].get<int>();
        if (e.contains("theta_it")) cfg.ensemble.theta_it = e["theta_it"].get<double>();
        if (e.contains("delta_low")) cfg.ensemble.delta_low = e["delta_low"].get<double>();
        if (e.contains("delta_up")) cfg.ensemble.delta_up = e["delta_up"].get<double>();
        if (e.contains("alpha_train")) cfg.ensemble.alpha_train = e["alpha_train"].get<double>();
        if (e.contains("alpha_test")) cfg.ensemble.alpha_test = e["alpha_test"].get<double>();
        if (e.contains("beta")) cfg.ensemble.beta = e["beta"].get<double>();
        if (e.contains("n_max_pool")) cfg.ensemble.n_max_pool = e["n_max_pool"].get<int>();
        if (e.contains("seed")) cfg.ensemble.seed = e["seed"].get<std::uint64_t>();
        if (e.contains("min_it_samples"))
            cfg.ensemble.min_it_samples = e["min_it_samples"].get<int>();
    }

    if (root.contains("scene")) {
        const json& s = root["scene"];
        require_known_keys(s,
                           {"frame_w", "frame_h", "roi", "bottle_width", "bottle_height",
                            "wall_thickness", "neck_width", "neck_height", "backlight",
                            "glass_level", "wall_level", "illumination_drift", "noise_sigma",
                            "defect_mix"},
                           "scene");
        if (s.contains("frame_w")) cfg.scene.frame_w = s["frame_w"].get<int>();
        if (s.contains("frame_h")) cfg.scene.frame_h = s["frame_h"].get<int>();
        if (s.contains("roi")) cfg.scene.roi = patch_from_json(s["roi"], "scene.roi");
        if (s.contains("bottle_width")) cfg.scene.bottle_width = s["bottle_width"].get<int>();
        if (s.contains("bottle_height")) cfg.scene.bottle_height = s["bottle_height"].get<int>();
        if (s.contains("wall_thickness"))
            cfg.scene.wall_thickness = s["wall_thickness"].get<int>();
        if (s.contains("neck_width")) cfg.scene.neck_width = s["neck_width"].get<int>();
        if (s.contains("neck_height")) cfg.scene.neck_height = s["neck_height"].get<int>();
        if (s.contains("backlight")) cfg.scene.backlight = s["backlight"].get<double>();
        if (s.contains("glass_level")) cfg.scene.glass_level = s["glass_level"].get<double>();
        if (s.contains("wall_level")) cfg.scene.wall_level = s["wall_level"].get<double>();
        if (s.contains("illumination_drift"))
            cfg.scene.illumination_drift = s["illumination_drift"].get<double>();
        if (s.contains("noise_sigma")) cfg.scene.noise_sigma = s["noise_sigma"].get<double>();
        if (s.contains("defect_mix")) {
            cfg.scene.defect_mix.clear();
            for (const auto& [kind, p] : s["defect_mix"].items())
                cfg.scene.defect_mix[defect_kind_from_string(kind)] = p.get<double>();
        }
    }

    if (root.contains("paths")) {
        const json& p = root["paths"];
        require_known_keys(p, {"dataset", "model", "report_dir"}, "paths");
        if (p.contains("dataset")) cfg.dataset_path = p["dataset"].get<std::string>();
        if (p.contains("model")) cfg.model_path = p["model"].get<std::string>();
        if (p.contains("report_dir")) cfg.report_dir = p["report_dir"].get<std::string>();
    }

    cfg.validate();
    return cfg;
}

std::string PipelineConfig::to_json_text() const {
    json root;
    json patches = json::array();
    for (const auto& p : trigger.patches) patches.push_back(patch_to_json(p));
    root["trigger"] = {{"patches", patches},
                       {"theta_thres", trigger.theta_thres},
                       {"n_background_frames", trigger.n_background_frames}};
    root["roi"] = patch_to_json(roi);
    root["lambda_avg"] = lambda_avg;
    root["features"] = {
        {"bhog", {{"rows", bhog_spec.rows}, {"cols", bhog_spec.cols}, {"n_bins", bhog_spec.n_bins}}},
        {"bgh", {{"rows", bgh_spec.rows}, {"cols", bgh_spec.cols}, {"n_bins", bgh_spec.n_bins}}},
        {"raw", {{"scale", raw_spec.scale}}}};
    root["ensemble"] = {{"T", ensemble.T},
                        {"theta_it", ensemble.theta_it},
                        {"delta_low", ensemble.delta_low},
                        {"delta_up", ensemble.delta_up},
                        {"alpha_train", ensemble.alpha_train},
                        {"alpha_test", ensemble.alpha_test},
                        {"beta", ensemble.beta},
                        {"n_max_pool", ensemble.n_max_pool},
                        {"seed", ensemble.seed},
                        {"min_it_samples", ensemble.min_it_samples}};
    json mix;
    for (const auto& [kind, p] : scene.defect_mix) mix[to_string(kind)] = p;
    root["scene"] = {{"frame_w", scene.frame_w},
                     {"frame_h", scene.frame_h},
                     {"roi", patch_to_json(scene.roi)},
                     {"bottle_width", scene.bottle_width},
                     {"bottle_height", scene.bottle_height},
                     {"wall_thickness", scene.wall_thickness},
                     {"neck_width", scene.neck_width},
                     {"neck_height", scene.neck_height},
                     {"backlight", scene.backlight},
                     {"glass_level", scene.glass_level},
                     {"wall_level", scene.wall_level},
                     {"illumination_drift", scene.illumination_drift},
                     {"noise_sigma", scene.noise_sigma},
                     {"defect_mix", mix}};
    root["paths"] = {{"dataset", dataset_path.string()},
                     {"model", model_path.string()},
                     {"report_dir", report_dir.string()}};
    return root.dump(2);
}

Metrics evaluate(const Labels& predictions, const Labels& truth) {
    if (predictions.size() != truth.size() || truth.size() == 0)
        throw std::invalid_argument("evaluate: empty or mismatched label vectors");
    Metrics m;
    m.n_total = truth.size();
    for (Eigen::Index i = 0; i < truth.size(); ++i) {
        if (truth[i] == +1) {
            ++m.n_qualified;
            if (predictions[i] == -1) ++m.n_fp;
        } else {
            ++m.n_defective;
            if (predictions[i] == +1) ++m.n_fn;
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    m.fp_rate = m.n_qualified > 0 ? static_cast<double>(m.n_fp) / m.n_qualified : nan;
    m.fn_rate = m.n_defective > 0 ? static_cast<double>(m.n_fn) / m.n_defective : nan;
    m.error_rate = static_cast<double>(m.n_fp + m.n_fn) / m.n_total;
    m.precision = 1.0 - m.error_rate;
    return m;
}

Metrics evaluate(const EnsembleModel& m, FeatureCache& cache) {
    return evaluate(ensemble_predict_all(m, cache), cache.dataset().labels());
}

LabeledDataset normalize_dataset(const LabeledDataset& d, double lambda_avg) {
    LabeledDataset out = d;
    for (auto& item : out.items) item.image = normalize_gray_mean(item.image, lambda_avg);
    return out;
}

std::vector<InspectionEvent> run_inspection(std::span<const Image> frames,
                                            const EnsembleModel& model,
                                            const PipelineConfig& cfg) {
    const int n_bg = cfg.trigger.n_background_frames;
    if (static_cast<int>(frames.size()) <= n_bg)
        throw std::invalid_argument("run_inspection: stream shorter than background window");

    // Frames are gray-mean normalized at ingest so the trigger compares
    // gain-free images: multiplicative illumination drift cancels exactly and
    // the patch-energy margins no longer depend on per-frame lighting.
    Image bg = Image::Zero(frames[0].rows(), frames[0].cols());
    for (int i = 0; i < n_bg; ++i)
        bg += normalize_gray_mean(frames[static_cast<size_t>(i)], cfg.lambda_avg);
    bg /= static_cast<double>(n_bg);

    std::vector<InspectionEvent> events;
    TriggerState state;
    for (size_t i = static_cast<size_t>(n_bg); i < frames.size(); ++i) {
        const int s_b =
            bottle_present(bg, normalize_gray_mean(frames[i], cfg.lambda_avg), cfg.trigger);
        if (!trigger_edge(state, s_b)) continue;

        InspectionEvent event;
        event.frame_index = static_cast<int>(i);
        try {
            const Image roi = normalize_gray_mean(crop_roi(frames[i], cfg.roi), cfg.lambda_avg);
            event.votes = model.member_votes(roi);
            int sum = 0;
            for (int v : event.votes) sum += v;
            event.verdict = sum > 0 ? +1 : -1;
        } catch (const degenerate_frame_error&) {
            event.skipped = true;
        }
        events.push_back(std::move(event));
    }
    return events;
}

std::string sweep_feature_params(FeatureCache& cache, std::span<const FeatureSpec> variants,
                                 std::span<const Family> families,
                                 const EnsembleParams& params) {
    std::ostringstream csv;
    csv << "feature,family,precision,delta_false,status,seed\n";
    int cell = 0;
    for (const auto& spec : variants) {
        for (Family family : families) {
            ClassifierConfig cfg;
            cfg.family = family;
            const std::uint64_t cell_seed =
                derive_seed(params.seed, "sweep-features" + std::to_string(cell));
            cfg.seed = derive_seed(cell_seed, "fit");
            csv << spec.name() << "," << to_string(family) << ",";
            try {
                const SubClassifier sub = fit_and_score(cfg, spec, cache, params,
                                                        derive_seed(cell_seed, "split"));
                csv << fmt(sub.p_correct) << "," << fmt(sub.delta_false) << ",ok,";
            } catch (const std::exception& e) {
                std::string reason = e.what();
                for (auto& c : reason)
                    if (c == ',' || c == '\n') c = ' ';
                csv << ",,failed:" << reason << ",";
            }
            csv << params.seed << "\n";
            ++cell;
        }
    }
    return csv.str();
}

std::string sweep_T(FeatureCache& train_cache, FeatureCache& test_cache,
                    const CandidatePool& pool, std::span<const int> Ts,
                    const EnsembleParams& params) {
    std::ostringstream csv;
    csv << "T,error_rate,precision,train_seconds,time_ratio,status,seed\n";
    double base_seconds = -1.0;
    for (int T : Ts) {
        EnsembleParams p = params;
        p.T = T;
        csv << T << ",";
        const auto start = std::chrono::steady_clock::now();
        try {
            const BuildResult built = build_ensemble(train_cache, pool, p);
            const double seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            if (base_seconds < 0.0) base_seconds = seconds;
            const Metrics m = evaluate(built.model, test_cache);
            csv << fmt(m.error_rate) << "," << fmt(m.precision) << "," << fmt(seconds) << ","
                << fmt(seconds / base_seconds) << ",ok,";
        } catch (const EnsembleBuildError& e) {
            std::string reason = e.what();
            for (auto& c : reason)
                if (c == ',' || c == '\n') c = ' ';
            csv << ",,,,failed:" << reason << ",";
        }
        csv << params.seed << "\n";
    }
    return csv.str();
}

std::string sweep_label_noise(const LabeledDataset& train, FeatureCache& test_cache,
                              const CandidatePool& pool, std::span<const double> ratios,
                              const EnsembleParams& params) {
    std::ostringstream csv;
    csv << "noise_ratio,flipped,error_rate,precision,status,seed\n";
    int row = 0;
    for (double ratio : ratios) {
        const LabeledDataset noisy = inject_label_noise(
            train, ratio, derive_seed(params.seed, "labelnoise" + std::to_string(row)));
        long flipped = 0;
        for (const auto& item : noisy.items)
            if (item.noise_flipped) ++flipped;
        FeatureCache cache(noisy);
        csv << fmt(ratio) << "," << flipped << ",";
        try {
            const BuildResult built = build_ensemble(cache, pool, params);
            const Metrics m = evaluate(built.model, test_cache);
            csv << fmt(m.error_rate) << "," << fmt(m.precision) << ",ok,";
        } catch (EnsembleBuildError& e) {
            if (e.partial.size() > 0) {
                // The build error carries the partial member list precisely so
                // heavy-noise rows can still report a precision measurement:
                // under crushing label noise the selection loop exhausts its
                // draws and the degraded partial ensemble IS the observable.
                // Voting needs an odd committee; drop the newest member if the
                // build stalled at an even count.
                EnsembleModel voters = std::move(e.partial);
                if (voters.size() % 2 == 0) voters.members.pop_back();
                const Metrics m = evaluate(voters, test_cache);
                csv << fmt(m.error_rate) << "," << fmt(m.precision) << ",partial:"
                    << voters.size() << ",";
            } else {
                std::string reason = e.what();
                for (auto& c : reason)
                    if (c == ',' || c == '\n') c = ' ';
                csv << ",,failed:" << reason << ",";
            }
        }
        csv << params.seed << "\n";
        ++row;
    }
    return csv.str();
}

std::string precision_curve_csv(std::span<const double> epsilons, std::span<const int> Ts) {
    std::ostringstream csv;
    csv << "epsilon,T,precision\n";
    for (const auto& point : precision_curve(epsilons, Ts))
        csv << fmt(point.epsilon) << "," << point.T << "," << fmt(point.precision) << "\n";
    return csv.str();
}

}  // namespace bottlescan
