#include "qadapose/geometry.hpp"

#include <set>

namespace qadapose {

void BeaconSet::validate() const {
  require(beacons.size() >= 4, ErrorKind::contract, "beacon set needs at least 4 beacons");
  std::set<int> ids;
  for (const auto& b : beacons) {
    require(b.position.allFinite(), ErrorKind::contract, "beacon position not finite");
    require(ids.insert(b.id).second, ErrorKind::contract, "duplicate beacon id");
  }
  if (planar) {
    for (const auto& b : beacons)
      require(std::abs(b.position.z() - beacons.front().position.z()) <= 1e-9, ErrorKind::contract,
              "planar beacon set has differing heights");
  }
}

BeaconSet BeaconSet::square(double side, double cx, double cy, double height) {
  const double h = side / 2;
  BeaconSet set;
  set.beacons = {{0, {cx - h, cy - h, height}},
                 {1, {cx + h, cy - h, height}},
                 {2, {cx + h, cy + h, height}},
                 {3, {cx - h, cy + h, height}}};
  return set;
}

}  // namespace qadapose
