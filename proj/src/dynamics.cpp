#include "fxd/dynamics.hpp"

#include <algorithm>

namespace fxd {

void DynamicObject::bracket(double t, int& lo, int& hi, double& u) const {
    if (track.empty())
        throw Error("object '" + id + "' has no pose track");
    if (t <= track.front().time) {
        lo = hi = 0;
        u = 0.0;
        return;
    }
    if (t >= track.back().time) {
        lo = hi = static_cast<int>(track.size()) - 1;
        u = 0.0;
        return;
    }
    auto it = std::upper_bound(track.begin(), track.end(), t,
                               [](double v, const PoseKey& k) { return v < k.time; });
    hi = static_cast<int>(it - track.begin());
    lo = hi - 1;
    double span = track[hi].time - track[lo].time;
    u = span > 0 ? (t - track[lo].time) / span : 0.0;
}

PoseKey DynamicObject::pose_at(double t) const {
    int lo, hi;
    double u;
    bracket(t, lo, hi, u);
    if (lo == hi || u == 0.0) {
        PoseKey p = track[lo];
        p.rotation = quat_normalized(p.rotation);
        return p;
    }
    PoseKey p;
    p.time = t;
    p.rotation = quat_slerp(quat_normalized(track[lo].rotation),
                            quat_normalized(track[hi].rotation), u);
    p.translation = (1.0 - u) * track[lo].translation + u * track[hi].translation;
    return p;
}

} // namespace fxd
