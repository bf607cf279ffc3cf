#include "qadapose/pipeline.hpp"

#include "qadapose/keyvalue.hpp"

namespace qadapose {

std::string to_string(Solver s) {
  switch (s) {
    case Solver::ippe: return "ippe";
    case Solver::rpnp: return "rpnp";
    case Solver::epnp: return "epnp";
    case Solver::epnp_gn: return "epnp_gn";
  }
  return "?";
}

Solver solver_from_string(const std::string& s) {
  if (s == "ippe") return Solver::ippe;
  if (s == "rpnp") return Solver::rpnp;
  if (s == "epnp") return Solver::epnp;
  if (s == "epnp_gn") return Solver::epnp_gn;
  fail(ErrorKind::config, "unknown solver '" + s + "' (expected ippe, rpnp, epnp or epnp_gn)");
}

std::vector<Solver> solvers_from_flag(const std::string& flag) {
  if (flag == "all") return {Solver::ippe, Solver::rpnp, Solver::epnp, Solver::epnp_gn};
  return {solver_from_string(flag)};
}

CodeBook codebook_for(const QadaCapture& capture) {
  return gen_codes(capture.family, capture.chip_length, capture.code_count, capture.code_seed,
                   capture.samples_per_chip);
}

std::vector<BeaconReading> read_image_points(const QadaCapture& capture, const CodeBook& book,
                                             const BeaconSet& beacons, const CalibrationParams& cal,
                                             RatioRule rule, Detector detector) {
  const auto tris = correlate_all(capture, book);
  std::vector<int> ids;
  for (const auto& b : beacons.beacons) {
    if (b.id < 0 || static_cast<std::size_t>(b.id) >= tris.size())
      fail(ErrorKind::detection, "beacon " + std::to_string(b.id) + ": no code in the capture's codebook (" +
                                     std::to_string(tris.size()) + " codes)");
    ids.push_back(b.id);
  }
  std::vector<RatioExtraction> ext;
  if (detector == Detector::decorrelating) {
    ext = extract_ratios_joint(tris, book, ids, rule);
  } else {
    for (int id : ids) {
      try {
        ext.push_back(extract_ratios(tris[static_cast<std::size_t>(id)], rule));
      } catch (const Error& e) {
        fail(ErrorKind::detection, "beacon " + std::to_string(id) + ": " + e.what());
      }
    }
  }
  std::vector<Eigen::Index> delays;
  for (std::size_t i = 0; i < ids.size(); ++i)
    delays.push_back(ext[i].peak_index - tris[static_cast<std::size_t>(ids[i])].zero_lag);
  const auto z = emitter_significance(capture, book, ids, delays);
  std::vector<BeaconReading> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!(z[i] >= kMinEmitterSignificance))
      fail(ErrorKind::detection, "beacon " + std::to_string(ids[i]) + ": code not detected (significance " +
                                     format_double(z[i]) + ")");
    BeaconReading r;
    r.beacon_id = ids[i];
    r.extraction = ext[i];
    r.significance = z[i];
    r.image = image_point_from_ratios(r.extraction.ratios, cal);
    out.push_back(r);
  }
  return out;
}

PnPSolution solve(Solver solver, const Correspondences& corr, const SelectionContext& ctx) {
  switch (solver) {
    case Solver::ippe: return ippe(corr, ctx).best;
    case Solver::rpnp: return rpnp(corr, ctx);
    case Solver::epnp: return epnp(corr, {}, ctx);
    case Solver::epnp_gn: return refine_gauss_newton(epnp(corr, {}, ctx), corr);
  }
  fail(ErrorKind::contract, "unknown solver");
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix_seed(master);
  for (std::uint64_t p : path) s = mix_seed(s ^ mix_seed(p + 0x632be59bd9b4e019ULL));
  return s;
}

}  // namespace qadapose
