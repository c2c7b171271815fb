// dmap: density-map toolkit for crowd counting and unsupervised people
// localization. Machine-readable results go to stdout as JSON lines;
// diagnostics go to stderr.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <future>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dmap/augment.hpp"
#include "dmap/evaluate.hpp"
#include "dmap/grid.hpp"
#include "dmap/gt_gen.hpp"
#include "dmap/localize.hpp"
#include "dmap/losses.hpp"

using nlohmann::json;

namespace {

void emit(const json& doc) { std::cout << doc.dump() << '\n'; }

dmap::SigmaPolicy parse_sigma(const std::string& spec, double beta, int k_neighbors,
                              double fallback) {
    if (spec == "adaptive")
        return dmap::SigmaPolicy::adaptive(beta, k_neighbors, fallback);
    if (spec == "fixed") return dmap::SigmaPolicy::fixed(15.0);
    if (spec.rfind("fixed:", 0) == 0)
        return dmap::SigmaPolicy::fixed(std::stod(spec.substr(6)));
    throw dmap::InvalidParameter("--sigma must be 'adaptive' or 'fixed:<pixels>'");
}

std::vector<int> parse_int_list(const std::string& csv, const char* what) {
    std::vector<int> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(std::stoi(item));
    if (out.empty())
        throw dmap::InvalidParameter(std::string(what) + " list must be non-empty");
    return out;
}

dmap::LocalizationResult load_centers(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw dmap::Error("cannot open centers file: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw dmap::ValidationError(std::string("malformed centers document: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("centers") || !doc["centers"].is_array())
        throw dmap::ValidationError("centers document must be {\"K\": int, \"centers\": [[x,y,mass],...]}");
    dmap::LocalizationResult result;
    for (const auto& c : doc["centers"]) {
        if (!c.is_array() || c.size() != 3)
            throw dmap::ValidationError("center must be a [x, y, mass] triple");
        result.centers.push_back({c[0].get<double>(), c[1].get<double>(),
                                  c[2].get<long long>()});
    }
    return result;
}

json centers_to_json(const dmap::LocalizationResult& result) {
    json centers = json::array();
    for (const dmap::Center& c : result.centers)
        centers.push_back({c.x, c.y, c.mass});
    return json{{"K", result.k()}, {"centers", std::move(centers)}};
}

void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw dmap::Error("cannot open output file: " + path);
    out << body;
    if (!out) throw dmap::Error("failed writing " + path);
}

void write_pgm(const dmap::DensityMap& map, const dmap::LocalizationResult* centers,
               const std::string& path) {
    const int w = map.width(), h = map.height();
    double peak = 0.0;
    for (double v : map.values()) peak = std::max(peak, v);
    std::vector<unsigned char> pixels(map.size(), 0);
    if (peak > 0.0) {
        const double scale = 255.0 / peak;
        for (std::size_t i = 0; i < map.size(); ++i)
            pixels[i] = static_cast<unsigned char>(
                std::clamp(std::lround(map.values()[i] * scale), 0L, 255L));
    }
    if (centers) {
        for (const dmap::Center& c : centers->centers) {
            const int cx = static_cast<int>(std::clamp<long>(std::lround(c.x), 0, w - 1));
            const int cy = static_cast<int>(std::clamp<long>(std::lround(c.y), 0, h - 1));
            const int marks[5][2] = {{0, 0}, {-1, 0}, {1, 0}, {0, -1}, {0, 1}};
            for (const auto& m : marks) {
                const int x = cx + m[0], y = cy + m[1];
                if (x >= 0 && x < w && y >= 0 && y < h)
                    pixels[static_cast<std::size_t>(y) * w + x] = 255;
            }
        }
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw dmap::Error("cannot open output file: " + path);
    out << "P5\n" << w << ' ' << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
    if (!out) throw dmap::Error("failed writing " + path);
}

struct LocalizeOptions {
    std::string method = "isolated";
    double expansion = 500.0;
    double epsilon = 5.0;
    long long min_weight = 5;
    int max_iters = 100;
    double tol = 1e-4;
    std::uint64_t seed = 0;
};

void add_localize_options(CLI::App* cmd, LocalizeOptions& opt) {
    cmd->add_option("--method", opt.method, "kmeans or isolated")
        ->check(CLI::IsMember({"kmeans", "isolated"}));
    cmd->add_option("--expansion", opt.expansion, "density expansion factor");
    cmd->add_option("--epsilon", opt.epsilon, "DBSCAN neighborhood radius (pixels)");
    cmd->add_option("--min-weight", opt.min_weight, "DBSCAN core weight threshold");
    cmd->add_option("--max-iters", opt.max_iters, "KMeans iteration cap");
    cmd->add_option("--tol", opt.tol, "KMeans center-movement stop threshold");
    cmd->add_option("--seed", opt.seed, "random seed");
}

dmap::LocalizationResult run_localizer(const dmap::DensityMap& map,
                                       const LocalizeOptions& opt) {
    const dmap::ExpansionFactor f(opt.expansion);
    const dmap::DbscanParams dp{opt.epsilon, opt.min_weight};
    const dmap::KMeansParams kp{opt.max_iters, opt.tol, opt.seed};
    if (opt.method == "kmeans") {
        const long long k = dmap::global_cluster_count(map);
        if (k == 0) return {};
        return dmap::kmeans(dmap::build_point_set(map, f), k, kp);
    }
    return dmap::isolated_kmeans(map, f, dp, kp);
}

int run(int argc, char** argv) {
    CLI::App app{"density-map toolkit: ground-truth generation, loss kernels, "
                 "unsupervised localization and evaluation"};
    app.require_subcommand(1);

    // ---- gen ----
    auto* gen = app.add_subcommand("gen", "generate a density map from annotations");
    std::string gen_ann, gen_out, gen_sigma = "adaptive";
    double gen_beta = 0.3, gen_fallback = 15.0;
    int gen_k = 3;
    gen->add_option("--annotations", gen_ann, "annotation JSON file")->required();
    gen->add_option("--out", gen_out, "output DMF1 file")->required();
    gen->add_option("--sigma", gen_sigma, "'adaptive' or 'fixed:<pixels>'");
    gen->add_option("--beta", gen_beta, "adaptive sigma scale");
    gen->add_option("--k-neighbors", gen_k, "adaptive neighbor count");
    gen->add_option("--fallback-sigma", gen_fallback, "sigma when neighbors are scarce");
    gen->callback([&] {
        const dmap::AnnotationSet ann = dmap::load_annotations(gen_ann);
        const dmap::SigmaPolicy policy = parse_sigma(gen_sigma, gen_beta, gen_k, gen_fallback);
        const dmap::DensityMap map = dmap::generate_density_map(ann, policy);
        dmap::write_density_map(map, gen_out);
        emit({{"integral", dmap::integral_count(map)},
              {"n", ann.points.size()},
              {"out", gen_out}});
    });

    // ---- attention ----
    auto* att = app.add_subcommand("attention", "generate a ground-truth attention map");
    std::string att_mode = "window", att_ann, att_density, att_out;
    int att_window = 25;
    double att_quantile = 0.40;
    att->add_option("--mode", att_mode, "window or threshold")
        ->check(CLI::IsMember({"window", "threshold"}));
    att->add_option("--annotations", att_ann, "annotation JSON (window mode)");
    att->add_option("--density", att_density, "DMF1 density map (threshold mode)");
    att->add_option("--out", att_out, "output DMF1 file")->required();
    att->add_option("--window", att_window, "odd window size in pixels");
    att->add_option("--quantile", att_quantile, "threshold quantile in (0,1)");
    att->callback([&] {
        dmap::AttentionMap map;
        if (att_mode == "window") {
            if (att_ann.empty())
                throw dmap::InvalidParameter("window mode needs --annotations");
            map = dmap::generate_attention_window(dmap::load_annotations(att_ann),
                                                  att_window);
        } else {
            if (att_density.empty())
                throw dmap::InvalidParameter("threshold mode needs --density");
            map = dmap::generate_attention_threshold(
                dmap::read_density_map(att_density), att_quantile);
        }
        dmap::write_density_map(
            dmap::DensityMap(map.width(), map.height(), map.values()), att_out);
        long long ones = 0;
        for (double v : map.values()) ones += v == 1.0;
        emit({{"ones", ones}, {"pixels", map.size()}, {"out", att_out}});
    });

    // ---- localize ----
    auto* loc = app.add_subcommand("localize", "estimate head centers from a density map");
    std::string loc_density, loc_out;
    LocalizeOptions loc_opt;
    loc->add_option("--density", loc_density, "DMF1 density map")->required();
    loc->add_option("--out", loc_out, "output centers JSON")->required();
    add_localize_options(loc, loc_opt);
    loc->callback([&] {
        const dmap::DensityMap map = dmap::read_density_map(loc_density);
        const dmap::LocalizationResult result = run_localizer(map, loc_opt);
        const json doc = centers_to_json(result);
        write_text_file(loc_out, doc.dump() + "\n");
        emit({{"K", result.k()}, {"method", loc_opt.method}, {"out", loc_out}});
    });

    // ---- eval ----
    auto* ev = app.add_subcommand("eval", "score centers against ground truth");
    std::string ev_centers, ev_ann, ev_deltas = "10,20,40";
    double ev_iou = 0.5;
    ev->add_option("--centers", ev_centers, "centers JSON file")->required();
    ev->add_option("--annotations", ev_ann, "annotation JSON file")->required();
    ev->add_option("--deltas", ev_deltas, "comma-separated window sizes");
    ev->add_option("--iou", ev_iou, "IoU threshold for a true positive");
    ev->callback([&] {
        const dmap::LocalizationResult result = load_centers(ev_centers);
        const dmap::AnnotationSet ann = dmap::load_annotations(ev_ann);
        dmap::EvalConfig cfg;
        cfg.deltas = parse_int_list(ev_deltas, "delta");
        cfg.iou_threshold = ev_iou;
        const auto reports = dmap::match_and_ap(result, ann, cfg);
        json ap;
        for (const auto& r : reports) ap[std::to_string(r.delta)] = r.ap;
        emit({{"ap", std::move(ap)},
              {"count_est", static_cast<double>(result.k())},
              {"count_gt", ann.points.size()}});
    });

    // ---- bench ----
    auto* bench = app.add_subcommand("bench", "run seeded synthetic localization benchmarks");
    int b_trials = 20, b_width = 192, b_height = 192, b_threads = 0;
    std::string b_heads = "50:300", b_placement = "mixture:4", b_methods = "kmeans,isolated";
    std::string b_deltas = "10,20,40", b_csv, b_sigma = "fixed:3";
    double b_noise = 0.0005, b_iou = 0.5, b_beta = 0.3, b_fallback = 15.0;
    int b_k_neighbors = 3;
    std::uint64_t b_seed = 1;
    LocalizeOptions b_opt;
    bench->add_option("--trials", b_trials, "number of synthetic scenes")
        ->check(CLI::PositiveNumber);
    bench->add_option("--width", b_width, "scene width");
    bench->add_option("--height", b_height, "scene height");
    bench->add_option("--heads", b_heads, "head count range min:max");
    bench->add_option("--placement", b_placement, "uniform or mixture:<components>");
    bench->add_option("--noise-sigma", b_noise, "additive noise scale");
    bench->add_option("--sigma", b_sigma, "scene sigma policy");
    bench->add_option("--beta", b_beta, "adaptive sigma scale");
    bench->add_option("--k-neighbors", b_k_neighbors, "adaptive neighbor count");
    bench->add_option("--fallback-sigma", b_fallback, "adaptive fallback sigma");
    bench->add_option("--methods", b_methods, "comma-separated localizers");
    bench->add_option("--deltas", b_deltas, "comma-separated window sizes");
    bench->add_option("--iou", b_iou, "IoU threshold");
    bench->add_option("--csv", b_csv, "per-trial CSV output path");
    bench->add_option("--threads", b_threads, "worker threads (0 = hardware)");
    bench->add_option("--seed", b_seed, "base seed; trial t uses seed + t");
    bench->add_option("--expansion", b_opt.expansion, "density expansion factor");
    bench->add_option("--epsilon", b_opt.epsilon, "DBSCAN neighborhood radius");
    bench->add_option("--min-weight", b_opt.min_weight, "DBSCAN core weight threshold");
    bench->add_option("--max-iters", b_opt.max_iters, "KMeans iteration cap");
    bench->add_option("--tol", b_opt.tol, "KMeans stop threshold");
    bench->callback([&] {
        dmap::SceneConfig base;
        base.width = b_width;
        base.height = b_height;
        {
            const auto sep = b_heads.find(':');
            if (sep == std::string::npos)
                throw dmap::InvalidParameter("--heads must be min:max");
            base.min_heads = std::stoi(b_heads.substr(0, sep));
            base.max_heads = std::stoi(b_heads.substr(sep + 1));
        }
        if (b_placement == "uniform") {
            base.placement = dmap::Placement::uniform;
        } else if (b_placement.rfind("mixture:", 0) == 0) {
            base.placement = dmap::Placement::gaussian_mixture;
            base.mixture_components = std::stoi(b_placement.substr(8));
        } else {
            throw dmap::InvalidParameter("--placement must be uniform or mixture:<m>");
        }
        base.noise_sigma = b_noise;
        base.sigma_policy = parse_sigma(b_sigma, b_beta, b_k_neighbors, b_fallback);
        base.validate();

        std::vector<std::string> methods;
        {
            std::stringstream ss(b_methods);
            std::string item;
            while (std::getline(ss, item, ','))
                if (!item.empty()) methods.push_back(item);
        }
        if (methods.empty()) throw dmap::InvalidParameter("--methods must be non-empty");
        for (const auto& m : methods)
            if (m != "kmeans" && m != "isolated")
                throw dmap::InvalidParameter("unknown method: " + m);

        dmap::EvalConfig eval_cfg;
        eval_cfg.deltas = parse_int_list(b_deltas, "delta");
        eval_cfg.iou_threshold = b_iou;
        eval_cfg.validate();

        struct TrialRow {
            std::uint64_t seed = 0;
            std::size_t heads = 0;
            // per method: K and AP per delta
            std::vector<long long> k_est;
            std::vector<std::vector<double>> ap;
        };
        std::vector<TrialRow> rows(static_cast<std::size_t>(b_trials));

        const auto run_trial = [&](int trial) {
            dmap::SceneConfig cfg = base;
            cfg.seed = b_seed + static_cast<std::uint64_t>(trial);
            const dmap::SynthScene scene = dmap::synth_scene(cfg);
            TrialRow row;
            row.seed = cfg.seed;
            row.heads = scene.annotations.points.size();
            for (const std::string& method : methods) {
                LocalizeOptions opt = b_opt;
                opt.method = method;
                opt.seed = cfg.seed;
                const dmap::LocalizationResult result = run_localizer(scene.noisy, opt);
                const auto reports = dmap::match_and_ap(result, scene.annotations, eval_cfg);
                row.k_est.push_back(result.k());
                std::vector<double> aps;
                for (const auto& r : reports) aps.push_back(r.ap);
                row.ap.push_back(std::move(aps));
            }
            rows[static_cast<std::size_t>(trial)] = std::move(row);
        };

        int threads = b_threads > 0 ? b_threads
                                    : static_cast<int>(std::thread::hardware_concurrency());
        threads = std::max(1, std::min(threads, b_trials));
        if (threads == 1) {
            for (int t = 0; t < b_trials; ++t) run_trial(t);
        } else {
            std::vector<std::future<void>> futs;
            futs.reserve(static_cast<std::size_t>(threads));
            for (int w = 0; w < threads; ++w) {
                futs.push_back(std::async(std::launch::async, [&, w] {
                    for (int t = w; t < b_trials; t += threads) run_trial(t);
                }));
            }
            for (auto& f : futs) f.get();
        }

        json method_summaries;
        for (std::size_t mi = 0; mi < methods.size(); ++mi) {
            std::vector<std::pair<double, double>> count_pairs;
            std::vector<double> ap_sums(eval_cfg.deltas.size(), 0.0);
            for (const TrialRow& row : rows) {
                count_pairs.push_back({static_cast<double>(row.k_est[mi]),
                                       static_cast<double>(row.heads)});
                for (std::size_t di = 0; di < eval_cfg.deltas.size(); ++di)
                    ap_sums[di] += row.ap[mi][di];
            }
            const dmap::CountingMetrics metrics = dmap::counting_metrics(count_pairs);
            json ap;
            for (std::size_t di = 0; di < eval_cfg.deltas.size(); ++di)
                ap[std::to_string(eval_cfg.deltas[di])] =
                    ap_sums[di] / static_cast<double>(b_trials);
            method_summaries[methods[mi]] = {
                {"ap", std::move(ap)}, {"mae", metrics.mae}, {"rmse", metrics.rmse}};
        }
        emit({{"trials", b_trials}, {"methods", std::move(method_summaries)}});

        if (!b_csv.empty()) {
            std::ostringstream csv;
            csv << "trial,seed,heads,method,count_est";
            for (int d : eval_cfg.deltas) csv << ",ap" << d;
            csv << "\n";
            for (int t = 0; t < b_trials; ++t) {
                const TrialRow& row = rows[static_cast<std::size_t>(t)];
                for (std::size_t mi = 0; mi < methods.size(); ++mi) {
                    csv << t << ',' << row.seed << ',' << row.heads << ','
                        << methods[mi] << ',' << row.k_est[mi];
                    for (std::size_t di = 0; di < eval_cfg.deltas.size(); ++di)
                        csv << ',' << json(row.ap[mi][di]).dump();
                    csv << "\n";
                }
            }
            write_text_file(b_csv, csv.str());
        }
    });

    // ---- viz ----
    auto* viz = app.add_subcommand("viz", "render a density map (and centers) as PGM");
    std::string viz_density, viz_centers, viz_out;
    viz->add_option("--density", viz_density, "DMF1 density map")->required();
    viz->add_option("--centers", viz_centers, "optional centers JSON");
    viz->add_option("--out", viz_out, "output PGM file")->required();
    viz->callback([&] {
        const dmap::DensityMap map = dmap::read_density_map(viz_density);
        dmap::LocalizationResult centers;
        const bool have_centers = !viz_centers.empty();
        if (have_centers) centers = load_centers(viz_centers);
        write_pgm(map, have_centers ? &centers : nullptr, viz_out);
        double peak = 0.0;
        for (double v : map.values()) peak = std::max(peak, v);
        emit({{"out", viz_out}, {"max_value", peak}});
    });

    // ---- losses ----
    auto* loss = app.add_subcommand("losses", "compute a loss between two DMF1 maps");
    std::string l_pred, l_gt, l_name = "mse", l_pooling = "avg", l_sizes = "1,2,4";
    std::string l_pred_att, l_gt_att, l_kernel = "gaussian";
    int l_levels = 3, l_ssim_size = 11;
    double l_ssim_sigma = 1.5, l_lambda = 0.5;
    loss->add_option("--pred", l_pred, "predicted DMF1 map")->required();
    loss->add_option("--gt", l_gt, "ground-truth DMF1 map")->required();
    loss->add_option("--loss", l_name, "mse, sal, msdlc, ssim, attention or total")
        ->check(CLI::IsMember({"mse", "sal", "msdlc", "ssim", "attention", "total"}));
    loss->add_option("--levels", l_levels, "SAL abstraction depth");
    loss->add_option("--pooling", l_pooling, "SAL pooling: avg or max")
        ->check(CLI::IsMember({"avg", "max"}));
    loss->add_option("--sizes", l_sizes, "msdlc pooling sizes");
    loss->add_option("--ssim-size", l_ssim_size, "SSIM window size");
    loss->add_option("--ssim-sigma", l_ssim_sigma, "SSIM gaussian sigma");
    loss->add_option("--ssim-kernel", l_kernel, "gaussian or uniform")
        ->check(CLI::IsMember({"gaussian", "uniform"}));
    loss->add_option("--pred-att", l_pred_att, "predicted attention DMF1 (total)");
    loss->add_option("--gt-att", l_gt_att, "ground-truth attention DMF1 (total)");
    loss->add_option("--lambda", l_lambda, "attention weight in the total loss");
    loss->callback([&] {
        const dmap::DensityMap pred = dmap::read_density_map(l_pred);
        const dmap::DensityMap gt = dmap::read_density_map(l_gt);
        const auto as_attention = [](const dmap::DensityMap& m) {
            return dmap::AttentionMap(m.width(), m.height(), m.values());
        };
        double value = 0.0;
        if (l_name == "mse") {
            value = dmap::mse_loss(pred, gt);
        } else if (l_name == "sal") {
            value = dmap::sal_loss(pred, gt, l_levels,
                                   l_pooling == "avg" ? dmap::Pooling::avg
                                                      : dmap::Pooling::max);
        } else if (l_name == "msdlc") {
            value = dmap::msdlc_loss(pred, gt, parse_int_list(l_sizes, "size"));
        } else if (l_name == "ssim") {
            dmap::SsimConfig cfg;
            cfg.kernel = l_kernel == "gaussian" ? dmap::SsimKernelKind::gaussian
                                                : dmap::SsimKernelKind::uniform;
            cfg.size = l_ssim_size;
            cfg.sigma = l_ssim_sigma;
            value = dmap::ssim_loss(pred, gt, cfg);
        } else if (l_name == "attention") {
            value = dmap::attention_loss(as_attention(pred), as_attention(gt));
        } else {
            if (l_pred_att.empty() || l_gt_att.empty())
                throw dmap::InvalidParameter("total loss needs --pred-att and --gt-att");
            value = dmap::total_loss(
                pred, gt, as_attention(dmap::read_density_map(l_pred_att)),
                as_attention(dmap::read_density_map(l_gt_att)),
                dmap::LossWeights{l_lambda});
        }
        emit({{"loss", l_name}, {"value", value}});
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit({{"error", std::string("argument error: ") + e.what()}});
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        emit({{"error", e.what()}});
        return 1;
    }
}
