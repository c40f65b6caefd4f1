#pragma once

// On-disk formats. Every file starts with one provenance comment line,
//   # locrobust <version> seed=<seed>
// and readers skip any line starting with '#'. Numbers are written in the
// shortest form that round-trips, so rewriting parsed data is byte-stable.
//
// Dataset record file (JSON lines, one sensor event per line, time order,
// truth sample before sensor events of the same timestamp):
//   {"type":"truth","t":..,"easting":..,"northing":..,"heading":..,"arc_length":..}
//   {"type":"odom","t":..,"distance":..,"heading_change":..}
//   {"type":"gps","t":..,"easting":..,"northing":..,"sigma":..}
//   {"type":"frame","t":..,"true_pose":[e,n,h] | null,
//    "observations":[{"class":"pole"|"corner","x":..,"y":..,"id":int|null},..]}
//
// CSV schemas:
//   map:     id,class,easting,northing
//   state:   t,arc_length,easting,northing,heading,cov00,cov01,cov02,cov10,cov11,cov12,cov20,cov21,cov22,source_of_last_update
//   events:  t,arc_length,source,accepted
//   pau:     l,probability
//   lattice: arc_length,dx,dy,dtheta,valid
//   profile: arc_length,radius
//   windows: begin,end,span_min,span_max,median,frames
//   margin:  arc_length,vpt_radius,bound,margin,flagged

#include "locrobust/core.hpp"
#include "locrobust/filter.hpp"
#include "locrobust/metrics.hpp"
#include "locrobust/sim.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace locrobust::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string version{kVersion};
};

std::string provenance_line(const Provenance& p);
/// Shortest round-trip decimal representation.
std::string format_number(double v);

void write_map_csv(std::ostream& out, const FeatureMap& map, const Provenance& p);
FeatureMap read_map_csv(std::istream& in);

void write_dataset(std::ostream& out, const sim::Dataset& data, const Provenance& p);
sim::Dataset read_dataset(std::istream& in);

void write_state_log(std::ostream& out, const std::vector<filter::StateLogEntry>& states, const Provenance& p);
std::vector<filter::StateLogEntry> read_state_log(std::istream& in);

void write_events(std::ostream& out, const std::vector<filter::UpdateEvent>& events, const Provenance& p);
std::vector<filter::UpdateEvent> read_events(std::istream& in);

void write_pau_csv(std::ostream& out, const metrics::PauCurve& curve, const Provenance& p);
void write_lattice_csv(std::ostream& out, const std::vector<metrics::VptBoundary>& lattices, const Provenance& p);
void write_profile_csv(std::ostream& out, const metrics::VptProfile& profile, const Provenance& p);
void write_windows_csv(std::ostream& out, const metrics::VptProfile& profile, const Provenance& p);
void write_margin_csv(std::ostream& out, const metrics::MarginReport& report, const Provenance& p);

/// Splits a CSV line on commas (no quoting is used by any schema here).
std::vector<std::string> split_csv(const std::string& line);

}  // namespace locrobust::io
