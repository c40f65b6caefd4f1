#include "locrobust/io.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <istream>
#include <ostream>
#include <sstream>

namespace locrobust::io {

using json = nlohmann::ordered_json;

namespace {

bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    return true;
  }
  return false;
}

double to_double(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw FormatError(fmt::format("expected a number for {}, got '{}'", what, s));
  }
}

void expect_header(std::istream& in, const std::string& expected) {
  std::string line;
  if (!next_data_line(in, line) || line != expected) {
    throw FormatError(fmt::format("expected CSV header '{}'", expected));
  }
}

std::vector<std::string> fields(const std::string& line, std::size_t n) {
  auto f = split_csv(line);
  if (f.size() != n) throw FormatError(fmt::format("expected {} fields, got {} in '{}'", n, f.size(), line));
  return f;
}

constexpr const char* kStateHeader =
    "t,arc_length,easting,northing,heading,cov00,cov01,cov02,cov10,cov11,cov12,cov20,cov21,cov22,"
    "source_of_last_update";

}  // namespace

std::string format_number(double v) { return fmt::format("{}", v); }

std::string provenance_line(const Provenance& p) {
  return fmt::format("# locrobust {} seed={}", p.version, p.seed);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

void write_map_csv(std::ostream& out, const FeatureMap& map, const Provenance& p) {
  out << provenance_line(p) << "\n" << "id,class,easting,northing\n";
  for (const auto& f : map.features()) {
    out << fmt::format("{},{},{},{}\n", f.id, to_string(f.cls), f.position.x(), f.position.y());
  }
}

FeatureMap read_map_csv(std::istream& in) {
  expect_header(in, "id,class,easting,northing");
  std::vector<MapFeature> features;
  std::string line;
  while (next_data_line(in, line)) {
    const auto f = fields(line, 4);
    MapFeature feat;
    feat.id = static_cast<int>(to_double(f[0], "id"));
    feat.cls = parse_feature_class(f[1]);
    feat.position = Vec2(to_double(f[2], "easting"), to_double(f[3], "northing"));
    features.push_back(feat);
  }
  return FeatureMap(std::move(features));
}

void write_dataset(std::ostream& out, const sim::Dataset& data, const Provenance& p) {
  out << provenance_line(p) << "\n";
  const auto& truth = data.ground_truth.samples();
  std::size_t it = 0, io = 0, ig = 0, iframe = 0;
  constexpr double kNever = std::numeric_limits<double>::infinity();
  for (;;) {
    const double tt = it < truth.size() ? truth[it].timestamp : kNever;
    const double to = io < data.odometry.size() ? data.odometry[io].timestamp : kNever;
    const double tg = ig < data.gps_readings.size() ? data.gps_readings[ig].timestamp : kNever;
    const double tf = iframe < data.feature_frames.size() ? data.feature_frames[iframe].timestamp : kNever;
    const double t = std::min({tt, to, tg, tf});
    if (t == kNever) break;
    json rec;
    if (tt == t) {
      const auto& s = truth[it++];
      rec = {{"type", "truth"},         {"t", s.timestamp},      {"easting", s.pose.easting()},
             {"northing", s.pose.northing()}, {"heading", s.pose.heading()}, {"arc_length", s.arc_length}};
    } else if (to == t) {
      const auto& o = data.odometry[io++];
      rec = {{"type", "odom"}, {"t", o.timestamp}, {"distance", o.distance}, {"heading_change", o.heading_change}};
    } else if (tg == t) {
      const auto& g = data.gps_readings[ig++];
      rec = {{"type", "gps"}, {"t", g.timestamp}, {"easting", g.easting}, {"northing", g.northing}, {"sigma", g.sigma}};
    } else {
      const auto& f = data.feature_frames[iframe++];
      json obs = json::array();
      for (const auto& o : f.observations) {
        json jo = {{"class", std::string(to_string(o.cls))}, {"x", o.point.x()}, {"y", o.point.y()}};
        jo["id"] = o.truth_id ? json(*o.truth_id) : json(nullptr);
        obs.push_back(std::move(jo));
      }
      rec = {{"type", "frame"}, {"t", f.timestamp}};
      rec["true_pose"] = f.true_pose ? json::array({f.true_pose->easting(), f.true_pose->northing(),
                                                    f.true_pose->heading()})
                                     : json(nullptr);
      rec["observations"] = std::move(obs);
    }
    out << rec.dump() << "\n";
  }
}

sim::Dataset read_dataset(std::istream& in) {
  sim::Dataset data;
  std::vector<double> times;
  std::vector<Pose2D> poses;
  std::string line;
  std::size_t lineno = 0;
  while (next_data_line(in, line)) {
    ++lineno;
    json rec;
    try {
      rec = json::parse(line);
      const std::string type = rec.at("type").get<std::string>();
      const double t = rec.at("t").get<double>();
      if (type == "truth") {
        times.push_back(t);
        poses.emplace_back(rec.at("easting").get<double>(), rec.at("northing").get<double>(),
                           rec.at("heading").get<double>());
      } else if (type == "odom") {
        data.odometry.push_back({t, rec.at("distance").get<double>(), rec.at("heading_change").get<double>()});
      } else if (type == "gps") {
        data.gps_readings.push_back({t, rec.at("easting").get<double>(), rec.at("northing").get<double>(),
                                     rec.at("sigma").get<double>()});
      } else if (type == "frame") {
        FeatureFrame frame;
        frame.timestamp = t;
        const auto& tp = rec.at("true_pose");
        if (!tp.is_null()) frame.true_pose = Pose2D(tp.at(0).get<double>(), tp.at(1).get<double>(), tp.at(2).get<double>());
        for (const auto& o : rec.at("observations")) {
          FeatureObservation obs;
          obs.cls = parse_feature_class(o.at("class").get<std::string>());
          obs.point = Vec2(o.at("x").get<double>(), o.at("y").get<double>());
          if (!o.at("id").is_null()) obs.truth_id = o.at("id").get<int>();
          frame.observations.push_back(std::move(obs));
        }
        data.feature_frames.push_back(std::move(frame));
      } else {
        throw FormatError("unknown record type '" + type + "'");
      }
    } catch (const FormatError&) {
      throw;
    } catch (const std::exception& e) {
      throw FormatError(fmt::format("dataset record {}: {}", lineno, e.what()));
    }
  }
  if (!times.empty()) data.ground_truth = Trajectory::from_poses(times, poses);
  return data;
}

void write_state_log(std::ostream& out, const std::vector<filter::StateLogEntry>& states, const Provenance& p) {
  out << provenance_line(p) << "\n" << kStateHeader << "\n";
  for (const auto& e : states) {
    const auto& s = e.state;
    const auto& c = s.covariance;
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", e.timestamp, e.arc_length,
                       s.pose.easting(), s.pose.northing(), s.pose.heading(), c(0, 0), c(0, 1), c(0, 2), c(1, 0),
                       c(1, 1), c(1, 2), c(2, 0), c(2, 1), c(2, 2), to_string(e.last_update));
  }
}

std::vector<filter::StateLogEntry> read_state_log(std::istream& in) {
  expect_header(in, kStateHeader);
  std::vector<filter::StateLogEntry> out;
  std::string line;
  while (next_data_line(in, line)) {
    const auto f = fields(line, 15);
    filter::StateLogEntry e;
    e.timestamp = to_double(f[0], "t");
    e.arc_length = to_double(f[1], "arc_length");
    e.state.pose = Pose2D(to_double(f[2], "easting"), to_double(f[3], "northing"), to_double(f[4], "heading"));
    e.state.timestamp = e.timestamp;
    for (int i = 0; i < 9; ++i) e.state.covariance(i / 3, i % 3) = to_double(f[5 + i], "covariance");
    e.last_update = filter::parse_update_source(f[14]);
    out.push_back(e);
  }
  return out;
}

void write_events(std::ostream& out, const std::vector<filter::UpdateEvent>& events, const Provenance& p) {
  out << provenance_line(p) << "\n" << "t,arc_length,source,accepted\n";
  for (const auto& e : events) {
    out << fmt::format("{},{},{},{}\n", e.timestamp, e.arc_length, to_string(e.source), e.accepted ? 1 : 0);
  }
}

std::vector<filter::UpdateEvent> read_events(std::istream& in) {
  expect_header(in, "t,arc_length,source,accepted");
  std::vector<filter::UpdateEvent> out;
  std::string line;
  while (next_data_line(in, line)) {
    const auto f = fields(line, 4);
    if (f[3] != "0" && f[3] != "1") throw FormatError("accepted must be 0 or 1");
    out.push_back({to_double(f[0], "t"), to_double(f[1], "arc_length"), filter::parse_update_source(f[2]), f[3] == "1"});
  }
  return out;
}

void write_pau_csv(std::ostream& out, const metrics::PauCurve& curve, const Provenance& p) {
  out << provenance_line(p) << "\n" << "l,probability\n";
  for (std::size_t i = 0; i < curve.lengths.size(); ++i) {
    out << fmt::format("{},{}\n", curve.lengths[i], curve.probabilities[i]);
  }
}

void write_lattice_csv(std::ostream& out, const std::vector<metrics::VptBoundary>& lattices, const Provenance& p) {
  out << provenance_line(p) << "\n" << "arc_length,dx,dy,dtheta,valid\n";
  for (const auto& b : lattices) {
    const auto& g = b.grid();
    for (int ix = -b.xy_half(); ix <= b.xy_half(); ++ix) {
      for (int iy = -b.xy_half(); iy <= b.xy_half(); ++iy) {
        for (int ih = -b.heading_half(); ih <= b.heading_half(); ++ih) {
          out << fmt::format("{},{},{},{},{}\n", b.arc_length(), ix * g.xy_step, iy * g.xy_step,
                             ih * g.heading_step, b.valid(ix, iy, ih) ? 1 : 0);
        }
      }
    }
  }
}

void write_profile_csv(std::ostream& out, const metrics::VptProfile& profile, const Provenance& p) {
  out << provenance_line(p) << "\n" << "arc_length,radius\n";
  for (std::size_t i = 0; i < profile.radii.size(); ++i) {
    out << fmt::format("{},{}\n", profile.arc_lengths[i], profile.radii[i]);
  }
}

void write_windows_csv(std::ostream& out, const metrics::VptProfile& profile, const Provenance& p) {
  out << provenance_line(p) << "\n" << "begin,end,span_min,span_max,median,frames\n";
  for (const auto& w : profile.windows) {
    out << fmt::format("{},{},{},{},{},{}\n", w.interval.begin, w.interval.end, w.span_min, w.span_max, w.median,
                       w.frames);
  }
}

void write_margin_csv(std::ostream& out, const metrics::MarginReport& report, const Provenance& p) {
  out << provenance_line(p) << "\n" << "arc_length,vpt_radius,bound,margin,flagged\n";
  for (std::size_t i = 0; i < report.arc.size(); ++i) {
    out << fmt::format("{},{},{},{},{}\n", report.arc[i], report.radius[i], report.bound[i], report.margin[i],
                       report.flagged[i] ? 1 : 0);
  }
}

}  // namespace locrobust::io
