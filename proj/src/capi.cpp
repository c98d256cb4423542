#include "calibtrack.h"

#include <cstring>
#include <exception>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include <json.hpp>

#include "confidence_metrics.hpp"
#include "io.hpp"
#include "mot_eval.hpp"
#include "synthetic.hpp"
#include "tracking.hpp"

using nlohmann::json;

namespace {

thread_local std::string g_last_error;

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return CT_OK;
    } catch (const std::invalid_argument& e) {
        g_last_error = e.what();
        return CT_ERROR_INVALID_ARGUMENT;
    } catch (const json::exception& e) {
        g_last_error = e.what();
        return CT_ERROR_INVALID_ARGUMENT;
    } catch (const std::runtime_error& e) {
        g_last_error = e.what();
        return CT_ERROR_IO;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return CT_ERROR_INTERNAL;
    }
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw std::invalid_argument(message);
}

ct::DetectorDistortion distortion_from_json(const json& j) {
    ct::DetectorDistortion d;
    d.link_w = j.value("link_w", d.link_w);
    d.link_delta = j.value("link_delta", d.link_delta);
    d.positional_weight = j.value("positional_weight", d.positional_weight);
    d.variance_scale = j.value("variance_scale", d.variance_scale);
    d.variance_profile_amp = j.value("variance_profile_amp", d.variance_profile_amp);
    d.reported_sigma = j.value("reported_sigma", d.reported_sigma);
    std::string noise = j.value("noise", std::string("gaussian"));
    require(noise == "gaussian" || noise == "cauchy", "noise must be gaussian or cauchy");
    d.noise = noise == "cauchy" ? ct::DetectorDistortion::Noise::Cauchy
                                : ct::DetectorDistortion::Noise::Gaussian;
    return d;
}

// Packs a generated sample-level dataset into the frame-based file formats
// (64 samples per frame, matched samples paired with their ground truth).
void write_dataset_files(const ct::MatchedDataset& dataset,
                         const std::string& detections_out,
                         const std::string& ground_truth_out) {
    ct::io::DetectionFile det_file;
    ct::io::GroundTruthFile gt_file;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const ct::CalibrationSample& s = dataset.samples[i];
        ct::Detection det;
        det.frame_id = static_cast<std::int64_t>(i / 64);
        det.detection_id = static_cast<std::int64_t>(i);
        det.label = s.label;
        det.confidence = s.confidence;
        det.box = s.box;
        det.box_variances = s.box_variances;
        det_file.detections.push_back(det);
        if (s.matched && s.gt_box) {
            ct::GroundTruthObject gt;
            gt.frame_id = det.frame_id;
            gt.object_id = static_cast<std::int64_t>(i);
            gt.label = s.label;
            gt.box = *s.gt_box;
            gt_file.objects.push_back(gt);
        }
    }
    ct::io::write_detections(detections_out, det_file);
    ct::io::write_ground_truth(ground_truth_out, gt_file);
}

void write_sequence_files(const std::vector<ct::Frame>& frames,
                          const std::string& detections_out,
                          const std::string& ground_truth_out) {
    ct::io::DetectionFile det_file;
    ct::io::GroundTruthFile gt_file;
    for (const ct::Frame& frame : frames) {
        for (const ct::Detection& det : frame.detections)
            det_file.detections.push_back(det);
        for (const ct::GroundTruthObject& gt : frame.ground_truths)
            gt_file.objects.push_back(gt);
    }
    ct::io::write_detections(detections_out, det_file);
    ct::io::write_ground_truth(ground_truth_out, gt_file);
}

ct::MatchedDataset load_matched_dataset(const std::string& detections_path,
                                        const std::string& ground_truth_path,
                                        double iou_threshold, double min_confidence) {
    ct::io::DetectionFile det = ct::io::read_detections(detections_path);
    ct::io::GroundTruthFile gt = ct::io::read_ground_truth(ground_truth_path);
    return ct::build_dataset(ct::io::to_frames(det, gt), iou_threshold, min_confidence);
}

ct::FeatureSet features_from_option(const std::string& option) {
    if (option == "conf") return {ct::BoxFeature::Confidence};
    if (option == "conf+box")
        return {ct::BoxFeature::Confidence, ct::BoxFeature::Cx, ct::BoxFeature::Cy,
                ct::BoxFeature::W, ct::BoxFeature::H};
    throw std::invalid_argument("features must be 'conf' or 'conf+box'");
}

bool is_confidence_model_tag(const std::string& tag) {
    static const std::map<std::string, int> conf_tags = {
        {"hist", 0},
        {"logistic", 0},
        {"logistic_mv_indep", 0},
        {"logistic_mv_dep", 0},
        {"beta", 0},
        {"beta_mv_indep", 0},
        {"beta_mv_dep", 0},
        {"bayesian_logistic", 0},
        {"bayesian_logistic_mv_indep", 0},
        {"bayesian_logistic_mv_dep", 0},
        {"bayesian_beta", 0},
        {"bayesian_beta_mv_indep", 0},
        {"bayesian_beta_mv_dep", 0},
    };
    return conf_tags.count(tag) > 0;
}

json mot_report_to_json(const ct::MotReport& r) {
    return json{{"mota", r.mota},
                {"motp_distance", r.motp_distance},
                {"motp_iou", r.motp_iou},
                {"idf1", r.idf1},
                {"fp_per_frame", r.fp_per_frame},
                {"fn_per_frame", r.fn_per_frame},
                {"idsw_per_object", r.idsw_per_object},
                {"mt", r.mt},
                {"pt", r.pt},
                {"ml", r.ml},
                {"tp", r.tp},
                {"fp", r.fp},
                {"fn", r.fn},
                {"idsw", r.idsw},
                {"frames", r.frames},
                {"objects", r.objects},
                {"gt_total", r.gt_total},
                {"track_total", r.track_total}};
}

}  // namespace

extern "C" {

struct ct_conf_model {
    ct::io::ConfidenceCalibrator model;
};

struct ct_reg_model {
    ct::io::RegressionCalibrator model;
};

const char* ct_version(void) { return "0.1.0"; }

const char* ct_last_error(void) { return g_last_error.c_str(); }

void ct_free_string(char* s) { delete[] s; }

int ct_conf_model_load(const char* path, ct_conf_model** out) {
    return guarded([&] {
        require(path != nullptr && out != nullptr, "null argument");
        *out = new ct_conf_model{ct::io::load_confidence_model(path)};
    });
}

void ct_conf_model_free(ct_conf_model* model) { delete model; }

int ct_conf_model_transform(const ct_conf_model* model, double confidence,
                            double cx, double cy, double w, double h, double* out) {
    return guarded([&] {
        require(model != nullptr && out != nullptr, "null argument");
        ct::CalibrationSample sample;
        sample.confidence = confidence;
        sample.box = ct::BoundingBox{cx, cy, w, h};
        *out = model->model.transform(sample);
    });
}

int ct_reg_model_load(const char* path, ct_reg_model** out) {
    return guarded([&] {
        require(path != nullptr && out != nullptr, "null argument");
        *out = new ct_reg_model{ct::io::load_regression_model(path)};
    });
}

void ct_reg_model_free(ct_reg_model* model) { delete model; }

int ct_reg_model_covariance(const ct_reg_model* model, const double mean[4],
                            const double var[4], double out[16]) {
    return guarded([&] {
        require(model != nullptr && mean != nullptr && var != nullptr && out != nullptr,
                "null argument");
        Eigen::Vector4d m(mean[0], mean[1], mean[2], mean[3]);
        Eigen::Vector4d v(var[0], var[1], var[2], var[3]);
        Eigen::Matrix4d cov = model->model.observation_covariance(m, v);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) out[4 * i + j] = cov(i, j);
    });
}

int ct_synth(const char* mode, const char* config_json, unsigned long long seed,
             const char* detections_out, const char* ground_truth_out) {
    return guarded([&] {
        require(mode != nullptr && config_json != nullptr && detections_out != nullptr &&
                    ground_truth_out != nullptr,
                "null argument");
        json config = json::parse(config_json);
        ct::DetectorDistortion distortion =
            distortion_from_json(config.value("distortion", json::object()));
        std::string mode_s = mode;
        if (mode_s == "dataset") {
            std::size_t n = config.value("n", std::size_t{10000});
            write_dataset_files(ct::generate_detection_dataset(distortion, n, seed),
                                detections_out, ground_truth_out);
        } else if (mode_s == "sequence") {
            ct::ScenarioConfig sc;
            sc.objects = config.value("objects", sc.objects);
            sc.frames = config.value("frames", sc.frames);
            sc.detection_probability =
                config.value("detection_probability", sc.detection_probability);
            sc.false_positives_per_frame =
                config.value("false_positives_per_frame", sc.false_positives_per_frame);
            sc.noise_sigma = config.value("noise_sigma", sc.noise_sigma);
            sc.tp_confidence_lo = config.value("tp_confidence_lo", sc.tp_confidence_lo);
            sc.tp_confidence_hi = config.value("tp_confidence_hi", sc.tp_confidence_hi);
            sc.fp_confidence_lo = config.value("fp_confidence_lo", sc.fp_confidence_lo);
            sc.fp_confidence_hi = config.value("fp_confidence_hi", sc.fp_confidence_hi);
            sc.jitter_sigma = config.value("jitter_sigma", sc.jitter_sigma);
            write_sequence_files(ct::generate_tracking_sequence(sc, distortion, seed),
                                 detections_out, ground_truth_out);
        } else {
            throw std::invalid_argument("mode must be 'dataset' or 'sequence'");
        }
    });
}

int ct_calibrate_confidence(const char* options_json, const char* detections_path,
                            const char* ground_truth_path, const char* model_out) {
    return guarded([&] {
        require(options_json != nullptr && detections_path != nullptr &&
                    ground_truth_path != nullptr && model_out != nullptr,
                "null argument");
        json options = json::parse(options_json);
        std::string method = options.value("method", std::string("logistic"));
        std::string features_opt = options.value("features", std::string("conf"));
        bool dependent = options.value("dependent", false);
        bool bayesian = options.value("bayesian", false);
        double iou = options.value("iou", 0.5);
        double min_confidence = options.value("min_confidence", 0.3);

        ct::MatchedDataset dataset =
            load_matched_dataset(detections_path, ground_truth_path, iou, min_confidence);
        ct::FeatureSet features = features_from_option(features_opt);

        ct::io::ConfidenceCalibrator calibrator;
        if (method == "hist") {
            require(!bayesian, "histogram binning has no bayesian variant");
            int default_bins = features.size() > 1 ? 5 : 20;
            int bins = options.value("bins", default_bins);
            calibrator.histogram = ct::fit_histogram(
                dataset, features, ct::BinningScheme::uniform(features.size(), bins));
        } else {
            ct::ScalingMethod scaling_method;
            if (method == "logistic") {
                scaling_method = features.size() > 1
                                     ? (dependent ? ct::ScalingMethod::LogisticMvDep
                                                  : ct::ScalingMethod::LogisticMvIndep)
                                     : ct::ScalingMethod::Logistic;
            } else if (method == "beta") {
                scaling_method = features.size() > 1
                                     ? (dependent ? ct::ScalingMethod::BetaMvDep
                                                  : ct::ScalingMethod::BetaMvIndep)
                                     : ct::ScalingMethod::Beta;
            } else {
                throw std::invalid_argument("method must be hist, logistic, or beta");
            }
            if (bayesian) {
                ct::SviConfig svi;
                svi.seed = options.value("seed", std::uint64_t{0});
                svi.epochs = options.value("epochs", svi.epochs);
                calibrator.bayesian = ct::fit_svi(scaling_method, dataset, features, svi);
            } else {
                calibrator.scaling =
                    ct::fit_scaling(scaling_method, dataset, features).model;
            }
        }
        ct::io::save_confidence_model(model_out, calibrator);
    });
}

int ct_calibrate_regression(const char* options_json, const char* detections_path,
                            const char* ground_truth_path, const char* model_out) {
    return guarded([&] {
        require(options_json != nullptr && detections_path != nullptr &&
                    ground_truth_path != nullptr && model_out != nullptr,
                "null argument");
        json options = json::parse(options_json);
        std::string method = options.value("method", std::string("var-scaling"));
        double iou = options.value("iou", 0.5);
        double min_confidence = options.value("min_confidence", 0.3);

        ct::RegressionDataset dataset = ct::to_regression(
            load_matched_dataset(detections_path, ground_truth_path, iou, min_confidence));

        ct::GpFitConfig gp_config;
        gp_config.max_points = options.value("max_points", gp_config.max_points);
        gp_config.max_iterations =
            options.value("max_iterations", gp_config.max_iterations);
        gp_config.optimize_theta =
            options.value("optimize_theta", gp_config.optimize_theta);
        gp_config.theta_init = options.value("theta_init", gp_config.theta_init);

        ct::io::RegressionCalibrator calibrator;
        if (method == "isotonic") {
            calibrator.isotonic = ct::fit_isotonic(dataset);
        } else if (method == "var-scaling") {
            calibrator.variance_scaling = ct::fit_variance_scaling(dataset);
        } else if (method == "gp-normal") {
            calibrator.gp = ct::fit_gp(ct::GpKind::Normal, dataset, gp_config);
        } else if (method == "gp-cauchy") {
            calibrator.gp = ct::fit_gp(ct::GpKind::Cauchy, dataset, gp_config);
        } else if (method == "gp-beta") {
            calibrator.gp = ct::fit_gp(ct::GpKind::Beta, dataset, gp_config);
        } else if (method == "gp-normal-mv") {
            calibrator.gp = ct::fit_gp(ct::GpKind::NormalMv, dataset, gp_config);
        } else if (method == "covariance") {
            calibrator.covariance = ct::estimate_covariance(dataset, gp_config);
        } else {
            throw std::invalid_argument("unknown regression method '" + method + "'");
        }
        ct::io::save_regression_model(model_out, calibrator);
    });
}

int ct_eval_calibration(const char* options_json, const char* detections_path,
                        const char* ground_truth_path, const char* model_path,
                        char** report_json_out) {
    return guarded([&] {
        require(options_json != nullptr && detections_path != nullptr &&
                    ground_truth_path != nullptr && report_json_out != nullptr,
                "null argument");
        json options = json::parse(options_json);
        double iou = options.value("iou", 0.5);
        double min_confidence = options.value("min_confidence", 0.3);
        int bins = options.value("bins", 20);
        std::vector<double> taus =
            options.value("tau_grid", std::vector<double>{0.5, 0.9, 0.95});
        std::vector<std::string> metrics = options.value(
            "metrics",
            std::vector<std::string>{"ece", "dece", "mce", "brier", "nll", "auprc"});

        ct::MatchedDataset dataset =
            load_matched_dataset(detections_path, ground_truth_path, iou, min_confidence);

        // An optional model recalibrates either the confidences or the
        // variances before scoring; the tag decides which side it is.
        ct::io::ConfidenceCalibrator conf_model;
        ct::io::RegressionCalibrator reg_model;
        bool have_conf = false, have_reg = false;
        if (model_path != nullptr) {
            std::ifstream in(model_path);
            if (!in) throw std::runtime_error(std::string("cannot open ") + model_path);
            json model_json = json::parse(std::string(
                std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
            std::string tag = model_json.at("method").get<std::string>();
            if (is_confidence_model_tag(tag)) {
                conf_model = ct::io::load_confidence_model(model_path);
                have_conf = true;
            } else {
                reg_model = ct::io::load_regression_model(model_path);
                have_reg = true;
            }
        }

        ct::MatchedDataset scored = dataset;
        if (have_conf)
            for (ct::CalibrationSample& s : scored.samples)
                s.confidence = conf_model.transform(s);

        ct::RegressionDataset regression = ct::to_regression(scored);
        if (have_reg) {
            for (ct::RegressionSample& s : regression.samples) {
                Eigen::Matrix4d cov = reg_model.observation_covariance(
                    Eigen::Vector4d(s.mean), Eigen::Vector4d(s.var));
                s.var = cov.diagonal();
            }
        }

        json out_metrics = json::object();
        ct::FeatureSet dece_features = {ct::BoxFeature::Confidence, ct::BoxFeature::Cx,
                                        ct::BoxFeature::Cy, ct::BoxFeature::W,
                                        ct::BoxFeature::H};
        for (const std::string& metric : metrics) {
            if (metric == "ece") {
                out_metrics["ece"] = ct::ece(scored, bins);
            } else if (metric == "dece") {
                out_metrics["dece"] = ct::dece(
                    scored, dece_features,
                    ct::BinningScheme::uniform(dece_features.size(), 5, 8));
            } else if (metric == "mce") {
                out_metrics["mce"] = ct::mce(scored, bins);
            } else if (metric == "brier") {
                out_metrics["brier"] = ct::brier(scored);
            } else if (metric == "nll") {
                out_metrics["nll"] = ct::nll_bernoulli(scored);
            } else if (metric == "auprc") {
                out_metrics["auprc"] = ct::auprc(scored);
            } else if (metric == "nll_gaussian") {
                out_metrics["nll_gaussian"] = ct::nll_gaussian(regression);
            } else if (metric == "m_qce") {
                for (double tau : taus)
                    out_metrics["m_qce@" + std::to_string(tau)] =
                        ct::m_qce(regression, tau);
            } else if (metric == "c_qce") {
                for (double tau : taus)
                    out_metrics["c_qce@" + std::to_string(tau)] =
                        ct::c_qce(regression, tau, bins);
            } else if (metric == "picp") {
                for (double tau : taus)
                    for (int d = 0; d < 4; ++d)
                        out_metrics["picp@" + std::to_string(tau) + "/dim" +
                                    std::to_string(d)] =
                            ct::interval_picp(regression, tau, d);
            } else if (metric == "pinball") {
                for (int d = 0; d < 4; ++d)
                    out_metrics["pinball/dim" + std::to_string(d)] =
                        ct::pinball_mean(regression, d);
            } else if (metric == "uce") {
                for (int d = 0; d < 4; ++d)
                    out_metrics["uce/dim" + std::to_string(d)] =
                        ct::uce(regression, d, bins);
            } else if (metric == "ence") {
                for (int d = 0; d < 4; ++d)
                    out_metrics["ence/dim" + std::to_string(d)] =
                        ct::ence(regression, d, bins);
            } else {
                throw std::invalid_argument("unknown metric '" + metric + "'");
            }
        }

        json report;
        report["metrics"] = out_metrics;
        report["samples"] = scored.samples.size();
        report["reliability_csv"] = ct::reliability_csv(ct::reliability(
            scored, {ct::BoxFeature::Confidence},
            ct::BinningScheme::uniform(1, bins)));
        *report_json_out = dup_string(report.dump(2));
    });
}

int ct_track(const char* tracker_config_json, const char* detections_path,
             const char* conf_model_path, const char* reg_model_path,
             const char* tracks_out) {
    return guarded([&] {
        require(tracker_config_json != nullptr && detections_path != nullptr &&
                    tracks_out != nullptr,
                "null argument");
        json config = json::parse(tracker_config_json);
        ct::TrackerConfig tc;
        tc.kalman.dt = config.value("dt", tc.kalman.dt);
        tc.kalman.process_noise = config.value("process_noise", tc.kalman.process_noise);
        tc.kalman.initial_velocity_var =
            config.value("initial_velocity_var", tc.kalman.initial_velocity_var);
        tc.kalman.initial_acceleration_var =
            config.value("initial_acceleration_var", tc.kalman.initial_acceleration_var);
        tc.kalman.default_observation_var =
            config.value("default_observation_var", tc.kalman.default_observation_var);
        tc.existence.p_stay = config.value("p_stay", tc.existence.p_stay);
        tc.existence.p_birth = config.value("p_birth", tc.existence.p_birth);
        tc.existence.precision_prior =
            config.value("precision_prior", tc.existence.precision_prior);
        tc.existence.drop_threshold =
            config.value("drop_threshold", tc.existence.drop_threshold);
        tc.existence.report_threshold =
            config.value("report_threshold", tc.existence.report_threshold);
        tc.existence.gate_quantile =
            config.value("gate_quantile", tc.existence.gate_quantile);

        ct::io::DetectionFile det_file = ct::io::read_detections(detections_path);

        ct::io::ConfidenceCalibrator conf_model;
        ct::io::RegressionCalibrator reg_model;
        ct::ConfidenceHook conf_hook;
        ct::RegressionHook reg_hook;
        if (conf_model_path != nullptr) {
            conf_model = ct::io::load_confidence_model(conf_model_path);
            conf_hook = [&conf_model](const ct::Detection& det) {
                ct::CalibrationSample sample;
                sample.confidence = det.confidence;
                sample.box = det.box;
                return conf_model.transform(sample);
            };
        }
        double default_var = tc.kalman.default_observation_var;
        if (reg_model_path != nullptr) {
            reg_model = ct::io::load_regression_model(reg_model_path);
            reg_hook = [&reg_model, default_var](const ct::Detection& det) {
                Eigen::Vector4d mean(det.box.cx, det.box.cy, det.box.w, det.box.h);
                Eigen::Vector4d var = Eigen::Vector4d::Constant(default_var);
                if (det.box_variances)
                    for (int d = 0; d < 4; ++d) var[d] = (*det.box_variances)[d];
                return reg_model.observation_covariance(mean, var);
            };
        }

        std::map<std::int64_t, std::vector<ct::Detection>> by_frame;
        for (const ct::Detection& det : det_file.detections)
            by_frame[det.frame_id].push_back(det);

        ct::Tracker tracker(tc);
        ct::io::TrackFile out;
        out.header = det_file.header;
        for (const auto& [frame_id, detections] : by_frame) {
            std::vector<ct::TrackOutput> emitted = tracker.step(
                static_cast<int>(frame_id), detections, conf_hook, reg_hook);
            for (const ct::TrackOutput& t : emitted) {
                ct::io::TrackRecord rec;
                rec.frame_id = t.frame_id;
                rec.track_id = t.track_id;
                rec.label = t.label;
                rec.box = t.box;
                rec.existence = t.existence;
                for (int d = 0; d < 4; ++d) rec.obs_variance[static_cast<std::size_t>(d)] = t.obs_variance[d];
                out.records.push_back(rec);
            }
        }
        ct::io::write_tracks(tracks_out, out);
    });
}

int ct_eval_mot(const char* tracks_path, const char* ground_truth_path,
                double iou_threshold, char** report_json_out) {
    return guarded([&] {
        require(tracks_path != nullptr && ground_truth_path != nullptr &&
                    report_json_out != nullptr,
                "null argument");
        ct::io::TrackFile tracks = ct::io::read_tracks(tracks_path);
        ct::io::GroundTruthFile gt = ct::io::read_ground_truth(ground_truth_path);
        ct::MotReport report = ct::evaluate_mot(ct::io::to_mot_boxes(gt),
                                                ct::io::to_mot_boxes(tracks),
                                                iou_threshold);
        *report_json_out = dup_string(mot_report_to_json(report).dump(2));
    });
}

}  // extern "C"
