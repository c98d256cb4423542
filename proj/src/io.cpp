#include "io.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace ct::io {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& message) {
    throw std::runtime_error(message);
}

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& context, bool strict) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (allowed.count(it.key())) continue;
        if (strict) fail(context + ": unknown field '" + it.key() + "'");
        std::cerr << "warning: " << context << ": ignoring unknown field '"
                  << it.key() << "'\n";
    }
}

json box_to_json(const BoundingBox& box) {
    return json{{"cx", box.cx}, {"cy", box.cy}, {"w", box.w}, {"h", box.h}};
}

BoundingBox box_from_json(const json& j, const std::string& context, bool strict) {
    if (!j.is_object()) fail(context + ": box must be an object");
    check_keys(j, {"cx", "cy", "w", "h"}, context, strict);
    BoundingBox box;
    box.cx = j.at("cx").get<double>();
    box.cy = j.at("cy").get<double>();
    box.w = j.at("w").get<double>();
    box.h = j.at("h").get<double>();
    return box;
}

json var_to_json(const std::array<double, 4>& v) {
    return json{{"cx", v[0]}, {"cy", v[1]}, {"w", v[2]}, {"h", v[3]}};
}

std::array<double, 4> var_from_json(const json& j, const std::string& context,
                                    bool strict) {
    if (!j.is_object()) fail(context + ": var must be an object");
    check_keys(j, {"cx", "cy", "w", "h"}, context, strict);
    return {j.at("cx").get<double>(), j.at("cy").get<double>(),
            j.at("w").get<double>(), j.at("h").get<double>()};
}

json header_to_json(const DatasetHeader& header) {
    return json{{"type", "header"},
                {"image_size", {header.image_w, header.image_h}},
                {"convention", header.convention}};
}

DatasetHeader header_from_json(const json& j, bool strict) {
    check_keys(j, {"type", "image_size", "convention"}, "header", strict);
    DatasetHeader header;
    const json& size = j.at("image_size");
    if (!size.is_array() || size.size() != 2) fail("header: image_size must be [w, h]");
    header.image_w = size[0].get<double>();
    header.image_h = size[1].get<double>();
    header.convention = j.at("convention").get<std::string>();
    if (header.convention != "relative" && header.convention != "pixel")
        fail("header: convention must be 'relative' or 'pixel'");
    return header;
}

// Parses one JSONL file: header line first, then one record per line.
template <typename Record>
void read_jsonl(const std::string& path, bool strict, DatasetHeader* header,
                std::vector<Record>* records,
                Record (*parse)(const json&, bool)) {
    std::ifstream in(path);
    if (!in) fail("cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        try {
            if (!have_header) {
                if (!j.is_object() || j.value("type", "") != "header")
                    fail("first line must be the dataset header");
                *header = header_from_json(j, strict);
                have_header = true;
            } else {
                records->push_back(parse(j, strict));
            }
        } catch (const std::exception& e) {
            fail(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) fail(path + ": missing dataset header line");
}

Detection parse_detection(const json& j, bool strict) {
    check_keys(j, {"frame_id", "detection_id", "label", "confidence", "box", "var"},
               "detection", strict);
    Detection det;
    det.frame_id = j.at("frame_id").get<std::int64_t>();
    det.detection_id = j.at("detection_id").get<std::int64_t>();
    det.label = j.at("label").get<int>();
    det.confidence = j.at("confidence").get<double>();
    if (det.confidence < 0.0 || det.confidence > 1.0)
        fail("detection: confidence out of [0,1]");
    det.box = box_from_json(j.at("box"), "detection", strict);
    if (j.contains("var")) det.box_variances = var_from_json(j.at("var"), "detection", strict);
    return det;
}

GroundTruthObject parse_ground_truth(const json& j, bool strict) {
    check_keys(j, {"frame_id", "object_id", "label", "box"}, "ground truth", strict);
    GroundTruthObject gt;
    gt.frame_id = j.at("frame_id").get<std::int64_t>();
    gt.object_id = j.at("object_id").get<std::int64_t>();
    gt.label = j.at("label").get<int>();
    gt.box = box_from_json(j.at("box"), "ground truth", strict);
    return gt;
}

TrackRecord parse_track(const json& j, bool strict) {
    check_keys(j, {"frame_id", "track_id", "label", "box", "existence", "obs_var"},
               "track", strict);
    TrackRecord rec;
    rec.frame_id = j.at("frame_id").get<int>();
    rec.track_id = j.at("track_id").get<std::int64_t>();
    rec.label = j.at("label").get<int>();
    rec.box = box_from_json(j.at("box"), "track", strict);
    rec.existence = j.at("existence").get<double>();
    if (j.contains("obs_var"))
        rec.obs_variance = var_from_json(j.at("obs_var"), "track", strict);
    return rec;
}

json eigen_to_json(const Eigen::VectorXd& v) {
    json out = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
    return out;
}

Eigen::VectorXd eigen_vector_from_json(const json& j) {
    if (!j.is_array()) fail("expected an array of numbers");
    Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i)
        v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

json eigen_to_json(const Eigen::MatrixXd& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
        out.push_back(row);
    }
    return out;
}

Eigen::MatrixXd eigen_matrix_from_json(const json& j) {
    if (!j.is_array() || j.empty()) fail("expected a non-empty matrix");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()),
                      static_cast<Eigen::Index>(j[0].size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (j[i].size() != j[0].size()) fail("ragged matrix");
        for (std::size_t k = 0; k < j[i].size(); ++k)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                j[i][k].get<double>();
    }
    return m;
}

json features_to_json(const FeatureSet& features) {
    json out = json::array();
    for (BoxFeature f : features) out.push_back(feature_name(f));
    return out;
}

FeatureSet features_from_json(const json& j) {
    FeatureSet features;
    for (const json& f : j) features.push_back(feature_from_name(f.get<std::string>()));
    return features;
}

json gp_to_json(const GpModel& model) {
    return json{{"train_mean", eigen_to_json(model.train_mean)},
                {"train_var", eigen_to_json(model.train_var)},
                {"latents", eigen_to_json(model.latents)},
                {"alpha", eigen_to_json(model.alpha)},
                {"coreg", eigen_to_json(model.coreg)},
                {"theta", model.theta},
                {"jitter", model.jitter}};
}

GpModel gp_from_json(const json& j) {
    GpModel model;
    model.train_mean = eigen_matrix_from_json(j.at("train_mean"));
    model.train_var = eigen_matrix_from_json(j.at("train_var"));
    model.latents = eigen_matrix_from_json(j.at("latents"));
    model.alpha = eigen_matrix_from_json(j.at("alpha"));
    model.coreg = eigen_matrix_from_json(j.at("coreg"));
    model.theta = j.at("theta").get<double>();
    model.jitter = j.at("jitter").get<double>();
    return model;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

void atomic_write(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail("cannot open " + tmp + " for writing");
        out << content;
        if (!out) {
            std::remove(tmp.c_str());
            fail("write failed for " + tmp);
        }
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        fail("rename failed for " + path);
    }
}

DetectionFile read_detections(const std::string& path, bool strict) {
    DetectionFile file;
    read_jsonl<Detection>(path, strict, &file.header, &file.detections, parse_detection);
    return file;
}

GroundTruthFile read_ground_truth(const std::string& path, bool strict) {
    GroundTruthFile file;
    read_jsonl<GroundTruthObject>(path, strict, &file.header, &file.objects,
                                  parse_ground_truth);
    return file;
}

TrackFile read_tracks(const std::string& path, bool strict) {
    TrackFile file;
    read_jsonl<TrackRecord>(path, strict, &file.header, &file.records, parse_track);
    return file;
}

void write_detections(const std::string& path, const DetectionFile& file) {
    std::ostringstream out;
    out << header_to_json(file.header).dump() << '\n';
    for (const Detection& det : file.detections) {
        json j{{"frame_id", det.frame_id},
               {"detection_id", det.detection_id},
               {"label", det.label},
               {"confidence", det.confidence},
               {"box", box_to_json(det.box)}};
        if (det.box_variances) j["var"] = var_to_json(*det.box_variances);
        out << j.dump() << '\n';
    }
    atomic_write(path, out.str());
}

void write_ground_truth(const std::string& path, const GroundTruthFile& file) {
    std::ostringstream out;
    out << header_to_json(file.header).dump() << '\n';
    for (const GroundTruthObject& gt : file.objects) {
        json j{{"frame_id", gt.frame_id},
               {"object_id", gt.object_id},
               {"label", gt.label},
               {"box", box_to_json(gt.box)}};
        out << j.dump() << '\n';
    }
    atomic_write(path, out.str());
}

void write_tracks(const std::string& path, const TrackFile& file) {
    std::ostringstream out;
    out << header_to_json(file.header).dump() << '\n';
    for (const TrackRecord& rec : file.records) {
        json j{{"frame_id", rec.frame_id},
               {"track_id", rec.track_id},
               {"label", rec.label},
               {"box", box_to_json(rec.box)},
               {"existence", rec.existence},
               {"obs_var", var_to_json(rec.obs_variance)}};
        out << j.dump() << '\n';
    }
    atomic_write(path, out.str());
}

std::vector<Frame> to_frames(const DetectionFile& detections,
                             const GroundTruthFile& ground_truth) {
    if (detections.header.convention != ground_truth.header.convention)
        fail("detections and ground truth use different coordinate conventions");
    std::map<std::int64_t, Frame> by_frame;
    for (const Detection& det : detections.detections)
        by_frame[det.frame_id].detections.push_back(det);
    for (const GroundTruthObject& gt : ground_truth.objects)
        by_frame[gt.frame_id].ground_truths.push_back(gt);
    std::vector<Frame> frames;
    frames.reserve(by_frame.size());
    for (auto& [id, frame] : by_frame) frames.push_back(std::move(frame));
    return frames;
}

std::vector<MotBox> to_mot_boxes(const GroundTruthFile& ground_truth) {
    std::vector<MotBox> out;
    out.reserve(ground_truth.objects.size());
    for (const GroundTruthObject& gt : ground_truth.objects)
        out.push_back(MotBox{static_cast<int>(gt.frame_id), gt.object_id, gt.label, gt.box});
    return out;
}

std::vector<MotBox> to_mot_boxes(const TrackFile& tracks) {
    std::vector<MotBox> out;
    out.reserve(tracks.records.size());
    for (const TrackRecord& rec : tracks.records)
        out.push_back(MotBox{rec.frame_id, rec.track_id, rec.label, rec.box});
    return out;
}

// ---------------------------------------------------------------------------
// Feature / method names

std::string feature_name(BoxFeature feature) {
    switch (feature) {
        case BoxFeature::Confidence: return "conf";
        case BoxFeature::Cx: return "cx";
        case BoxFeature::Cy: return "cy";
        case BoxFeature::W: return "w";
        case BoxFeature::H: return "h";
    }
    fail("bad feature");
}

BoxFeature feature_from_name(const std::string& name) {
    if (name == "conf") return BoxFeature::Confidence;
    if (name == "cx") return BoxFeature::Cx;
    if (name == "cy") return BoxFeature::Cy;
    if (name == "w") return BoxFeature::W;
    if (name == "h") return BoxFeature::H;
    fail("unknown feature '" + name + "'");
}

std::string scaling_method_name(ScalingMethod method) {
    switch (method) {
        case ScalingMethod::Logistic: return "logistic";
        case ScalingMethod::LogisticMvIndep: return "logistic_mv_indep";
        case ScalingMethod::LogisticMvDep: return "logistic_mv_dep";
        case ScalingMethod::Beta: return "beta";
        case ScalingMethod::BetaMvIndep: return "beta_mv_indep";
        case ScalingMethod::BetaMvDep: return "beta_mv_dep";
    }
    fail("bad scaling method");
}

ScalingMethod scaling_method_from_name(const std::string& name) {
    if (name == "logistic") return ScalingMethod::Logistic;
    if (name == "logistic_mv_indep") return ScalingMethod::LogisticMvIndep;
    if (name == "logistic_mv_dep") return ScalingMethod::LogisticMvDep;
    if (name == "beta") return ScalingMethod::Beta;
    if (name == "beta_mv_indep") return ScalingMethod::BetaMvIndep;
    if (name == "beta_mv_dep") return ScalingMethod::BetaMvDep;
    fail("unknown scaling method '" + name + "'");
}

// ---------------------------------------------------------------------------
// Confidence model serialization

double ConfidenceCalibrator::transform(const CalibrationSample& sample,
                                       int bayes_samples, std::uint64_t seed) const {
    if (histogram) return histogram->transform(sample);
    if (scaling) return scaling->transform(sample);
    if (bayesian) return predict(*bayesian, sample, bayes_samples, seed).mean;
    fail("empty confidence calibrator");
}

void save_confidence_model(const std::string& path, const ConfidenceCalibrator& model) {
    json j;
    if (model.histogram) {
        const HistogramBinningModel& h = *model.histogram;
        j["method"] = "hist";
        j["features"] = features_to_json(h.features);
        j["bins_per_dim"] = h.scheme.bins_per_dim;
        json ranges = json::array();
        for (const auto& [lo, hi] : h.scheme.ranges) ranges.push_back({lo, hi});
        j["ranges"] = ranges;
        j["min_samples_per_bin"] = h.scheme.min_samples_per_bin;
        j["theta"] = h.theta;
        j["fallback"] = h.fallback;
    } else if (model.scaling) {
        j["method"] = scaling_method_name(model.scaling->method);
        j["features"] = features_to_json(model.scaling->features);
        j["params"] = eigen_to_json(model.scaling->params);
    } else if (model.bayesian) {
        j["method"] = "bayesian_" + scaling_method_name(model.bayesian->method);
        j["features"] = features_to_json(model.bayesian->features);
        j["mean"] = eigen_to_json(model.bayesian->mean);
        j["log_std"] = eigen_to_json(model.bayesian->log_std);
    } else {
        fail("empty confidence calibrator");
    }
    atomic_write(path, j.dump(2) + "\n");
}

ConfidenceCalibrator load_confidence_model(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        fail(path + ": " + e.what());
    }
    std::string method = j.at("method").get<std::string>();
    ConfidenceCalibrator model;
    if (method == "hist") {
        HistogramBinningModel h;
        h.features = features_from_json(j.at("features"));
        h.scheme.bins_per_dim = j.at("bins_per_dim").get<std::vector<int>>();
        for (const json& r : j.at("ranges"))
            h.scheme.ranges.emplace_back(r[0].get<double>(), r[1].get<double>());
        h.scheme.min_samples_per_bin = j.at("min_samples_per_bin").get<int>();
        h.theta = j.at("theta").get<std::vector<double>>();
        h.fallback = j.at("fallback").get<double>();
        model.histogram = std::move(h);
    } else if (method.rfind("bayesian_", 0) == 0) {
        VariationalPosterior post;
        post.method = scaling_method_from_name(method.substr(9));
        post.features = features_from_json(j.at("features"));
        post.mean = eigen_vector_from_json(j.at("mean"));
        post.log_std = eigen_vector_from_json(j.at("log_std"));
        model.bayesian = std::move(post);
    } else {
        ScalingModel s;
        s.method = scaling_method_from_name(method);  // throws on unknown tags
        s.features = features_from_json(j.at("features"));
        s.params = eigen_vector_from_json(j.at("params"));
        model.scaling = std::move(s);
    }
    return model;
}

// ---------------------------------------------------------------------------
// Regression model serialization

Eigen::Matrix4d RegressionCalibrator::observation_covariance(
    const Eigen::Vector4d& mean, const Eigen::Vector4d& var) const {
    Eigen::Vector4d out_var = var;
    if (isotonic) {
        for (int d = 0; d < 4; ++d) {
            CalibratedDistribution dist =
                transform_isotonic(*isotonic, d, mean[d], var[d]);
            out_var[d] = moment_match(dist).second;
        }
        return out_var.asDiagonal();
    }
    if (variance_scaling) {
        for (int d = 0; d < 4; ++d)
            out_var[d] = variance_scaling->w[d] * variance_scaling->w[d] * var[d];
        return out_var.asDiagonal();
    }
    if (gp) {
        std::vector<CalibratedDistribution> dists = transform_gp(*gp, mean, var);
        for (int d = 0; d < 4; ++d) {
            const CalibratedDistribution& dist = dists[static_cast<std::size_t>(d)];
            if (dist.kind == CalibratedDistribution::Kind::Gaussian) {
                out_var[d] = dist.var;
            } else if (dist.kind == CalibratedDistribution::Kind::Cauchy) {
                // No finite moments; the squared scale is the pragmatic stand-in.
                out_var[d] = dist.scale * dist.scale;
            } else {
                out_var[d] = moment_match(dist).second;
            }
        }
        return out_var.asDiagonal();
    }
    if (covariance) return transform_covariance(*covariance, mean, var);
    fail("empty regression calibrator");
}

namespace {

std::string gp_kind_name(GpKind kind) {
    switch (kind) {
        case GpKind::Normal: return "gp_normal";
        case GpKind::Cauchy: return "gp_cauchy";
        case GpKind::Beta: return "gp_beta";
        case GpKind::NormalMv: return "gp_normal_mv";
    }
    fail("bad gp kind");
}

GpKind gp_kind_from_name(const std::string& name) {
    if (name == "gp_normal") return GpKind::Normal;
    if (name == "gp_cauchy") return GpKind::Cauchy;
    if (name == "gp_beta") return GpKind::Beta;
    if (name == "gp_normal_mv") return GpKind::NormalMv;
    fail("unknown gp kind '" + name + "'");
}

}  // namespace

void save_regression_model(const std::string& path, const RegressionCalibrator& model) {
    json j;
    if (model.isotonic) {
        j["method"] = "isotonic";
        j["breakpoints"] = model.isotonic->breakpoints;
        j["values"] = model.isotonic->values;
    } else if (model.variance_scaling) {
        j["method"] = "var_scaling";
        j["w"] = eigen_to_json(model.variance_scaling->w);
    } else if (model.gp) {
        j["method"] = gp_kind_name(model.gp->kind);
        json models = json::array();
        for (const GpModel& m : model.gp->models) models.push_back(gp_to_json(m));
        j["models"] = models;
    } else if (model.covariance) {
        j["method"] = "covariance";
        j["corr"] = eigen_to_json(model.covariance->corr);
        j["has_gp"] = model.covariance->has_gp;
        if (model.covariance->has_gp) j["gp"] = gp_to_json(model.covariance->gp);
    } else {
        fail("empty regression calibrator");
    }
    atomic_write(path, j.dump(2) + "\n");
}

RegressionCalibrator load_regression_model(const std::string& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        fail(path + ": " + e.what());
    }
    std::string method = j.at("method").get<std::string>();
    RegressionCalibrator model;
    if (method == "isotonic") {
        IsotonicModel m;
        m.breakpoints = j.at("breakpoints").get<std::vector<std::vector<double>>>();
        m.values = j.at("values").get<std::vector<std::vector<double>>>();
        model.isotonic = std::move(m);
    } else if (method == "var_scaling") {
        VarianceScalingModel m;
        m.w = eigen_vector_from_json(j.at("w"));
        model.variance_scaling = std::move(m);
    } else if (method == "covariance") {
        CovarianceModel m;
        m.corr = eigen_matrix_from_json(j.at("corr"));
        m.has_gp = j.at("has_gp").get<bool>();
        if (m.has_gp) m.gp = gp_from_json(j.at("gp"));
        model.covariance = std::move(m);
    } else {
        GpCalibrator gp;
        gp.kind = gp_kind_from_name(method);  // throws on unknown tags
        for (const json& m : j.at("models")) gp.models.push_back(gp_from_json(m));
        model.gp = std::move(gp);
    }
    return model;
}

}  // namespace ct::io
