#include "dmap/localize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "dmap/rng.hpp"

namespace dmap {

namespace {

std::uint64_t coord_key(int x, int y) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(y)) << 32) |
           static_cast<std::uint32_t>(x);
}

double dist2(double ax, double ay, double bx, double by) {
    const double dx = ax - bx, dy = ay - by;
    return dx * dx + dy * dy;
}

// Uniform bucket grid with cell size = epsilon; purely an accelerator,
// every query re-checks exact distances.
class BucketGrid {
public:
    BucketGrid(const std::vector<WeightedPoint>& pts, double cell) : cell_(cell) {
        for (std::size_t i = 0; i < pts.size(); ++i)
            cells_[cell_key(pts[i].x, pts[i].y)].push_back(static_cast<int>(i));
    }

    template <typename Fn>
    void for_cell(int cx, int cy, Fn&& fn) const {
        const auto it = cells_.find(key(cx, cy));
        if (it == cells_.end()) return;
        for (int idx : it->second) fn(idx);
    }

    // All points in the 3x3 cell block around (x, y); superset of the
    // epsilon-neighborhood.
    template <typename Fn>
    void for_candidates(int x, int y, Fn&& fn) const {
        const int cx = coord(x), cy = coord(y);
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) for_cell(cx + dx, cy + dy, fn);
    }

    int coord(int v) const { return static_cast<int>(std::floor(v / cell_)); }

private:
    std::uint64_t cell_key(int x, int y) const { return key(coord(x), coord(y)); }
    static std::uint64_t key(int cx, int cy) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(cy)) << 32) |
               static_cast<std::uint32_t>(cx);
    }

    double cell_;
    std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

}  // namespace

void WeightedPointSet::validate() const {
    if (width < 1 || height < 1)
        throw ValidationError("point-set frame must have positive dimensions");
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(points.size() * 2);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const WeightedPoint& p = points[i];
        if (p.weight < 1)
            throw ValidationError("point weight must be >= 1",
                                  static_cast<std::int64_t>(i));
        if (p.x < 0 || p.x >= width || p.y < 0 || p.y >= height)
            throw ValidationError("point outside the frame",
                                  static_cast<std::int64_t>(i));
        if (!seen.insert(coord_key(p.x, p.y)).second)
            throw ValidationError("duplicate point coordinates",
                                  static_cast<std::int64_t>(i));
    }
}

void KMeansParams::validate() const {
    if (max_iters < 1) throw InvalidParameter("max_iters must be >= 1");
    if (!(tol > 0.0) || !std::isfinite(tol))
        throw InvalidParameter("tol must be positive");
}

void DbscanParams::validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw InvalidParameter("epsilon must be positive");
    if (min_weight < 1) throw InvalidParameter("min_weight must be >= 1");
}

WeightedPointSet build_point_set(const DensityMap& map, ExpansionFactor f) {
    WeightedPointSet s;
    s.width = map.width();
    s.height = map.height();
    for (int y = 0; y < map.height(); ++y) {
        for (int x = 0; x < map.width(); ++x) {
            const double v = map.at(x, y);
            const long long freq = std::llround(v * f.factor);
            if (freq >= 1) s.points.push_back({x, y, freq, v});
        }
    }
    return s;
}

long long global_cluster_count(const DensityMap& map) {
    return std::max<long long>(0, std::llround(integral_count(map)));
}

LocalizationResult kmeans(const WeightedPointSet& pts, long long k,
                          const KMeansParams& params, KMeansTrace* trace) {
    params.validate();
    pts.validate();
    if (k < 0) throw InvalidParameter("cluster count must be >= 0");
    if (trace) trace->wcss.clear();
    LocalizationResult result;
    if (k == 0) return result;
    const std::size_t n = pts.points.size();
    if (static_cast<long long>(n) < k)
        throw InfeasibleK(k, static_cast<long long>(n));

    std::vector<double> px(n), py(n), pw(n);
    for (std::size_t i = 0; i < n; ++i) {
        px[i] = pts.points[i].x;
        py[i] = pts.points[i].y;
        pw[i] = static_cast<double>(pts.points[i].weight);
    }

    const std::size_t kk = static_cast<std::size_t>(k);
    std::vector<double> cx(kk), cy(kk);

    // Weighted greedy k-means++: first center by weight, the rest by weight
    // times squared distance to the nearest chosen center, keeping the
    // candidate that shrinks the potential most (2 + log2(k) tries).
    Rng rng(params.seed);
    std::vector<double> cum(n);
    const auto sample = [&](double total) {
        const double u = rng.next_double() * total;
        const std::size_t idx = static_cast<std::size_t>(
            std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
        return std::min(idx, n - 1);
    };
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) cum[i] = (total += pw[i]);
        const std::size_t idx = sample(total);
        cx[0] = px[idx];
        cy[0] = py[idx];
    }
    int tries = 2;
    for (std::size_t t = kk; t > 1; t >>= 1) ++tries;
    for (std::size_t c = 1; c < kk; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], dist2(px[i], py[i], cx[c - 1], cy[c - 1]));
            cum[i] = (total += pw[i] * d2[i]);
        }
        std::size_t best_idx = 0;
        double best_potential = std::numeric_limits<double>::infinity();
        for (int attempt = 0; attempt < tries; ++attempt) {
            std::size_t idx;
            if (total > 0.0) {
                idx = sample(total);
            } else {
                // All mass sits on chosen centers; distinct points make this
                // unreachable, kept as a safeguard.
                idx = static_cast<std::size_t>(
                    std::max_element(d2.begin(), d2.end()) - d2.begin());
            }
            double potential = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                potential +=
                    pw[i] * std::min(d2[i], dist2(px[i], py[i], px[idx], py[idx]));
            if (potential < best_potential) {
                best_potential = potential;
                best_idx = idx;
            }
        }
        cx[c] = px[best_idx];
        cy[c] = py[best_idx];
    }

    std::vector<int> assign(n, 0);
    const auto assign_all = [&]() {
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int bi = 0;
            for (std::size_t c = 0; c < kk; ++c) {
                const double d = dist2(px[i], py[i], cx[c], cy[c]);
                if (d < best) {  // ties keep the lower center index
                    best = d;
                    bi = static_cast<int>(c);
                }
            }
            assign[i] = bi;
        }
    };

    std::vector<long long> member_count(kk);
    const auto repair_empty = [&]() {
        member_count.assign(kk, 0);
        for (std::size_t i = 0; i < n; ++i) ++member_count[assign[i]];
        while (true) {
            int empty = -1;
            for (std::size_t c = 0; c < kk; ++c)
                if (member_count[c] == 0) {
                    empty = static_cast<int>(c);
                    break;
                }
            if (empty < 0) break;
            // Relocate the empty center onto the point farthest from its own
            // center, among clusters that keep at least two members.
            double best = -1.0;
            std::size_t bi = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (member_count[assign[i]] < 2) continue;
                const double d = dist2(px[i], py[i], cx[assign[i]], cy[assign[i]]);
                if (d > best) {
                    best = d;
                    bi = i;
                }
            }
            --member_count[assign[bi]];
            assign[bi] = empty;
            member_count[empty] = 1;
            cx[empty] = px[bi];
            cy[empty] = py[bi];
        }
    };

    const auto wcss_now = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += pw[i] * dist2(px[i], py[i], cx[assign[i]], cy[assign[i]]);
        return s;
    };

    assign_all();
    repair_empty();
    if (trace) trace->wcss.push_back(wcss_now());

    std::vector<double> sx(kk), sy(kk), sw(kk);
    for (int iter = 0; iter < params.max_iters; ++iter) {
        sx.assign(kk, 0.0);
        sy.assign(kk, 0.0);
        sw.assign(kk, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const int c = assign[i];
            sx[c] += pw[i] * px[i];
            sy[c] += pw[i] * py[i];
            sw[c] += pw[i];
        }
        double max_move2 = 0.0;
        for (std::size_t c = 0; c < kk; ++c) {
            const double nx = sx[c] / sw[c], ny = sy[c] / sw[c];
            max_move2 = std::max(max_move2, dist2(nx, ny, cx[c], cy[c]));
            cx[c] = nx;
            cy[c] = ny;
        }
        assign_all();
        repair_empty();
        if (trace) trace->wcss.push_back(wcss_now());
        if (max_move2 < params.tol * params.tol) break;
    }

    std::vector<long long> mass(kk, 0);
    for (std::size_t i = 0; i < n; ++i) mass[assign[i]] += pts.points[i].weight;
    result.centers.reserve(kk);
    for (std::size_t c = 0; c < kk; ++c)
        result.centers.push_back({cx[c], cy[c], mass[c]});
    std::sort(result.centers.begin(), result.centers.end(),
              [](const Center& a, const Center& b) {
                  if (a.mass != b.mass) return a.mass > b.mass;
                  if (a.x != b.x) return a.x < b.x;
                  return a.y < b.y;
              });
    return result;
}

SubregionPartition dbscan(const WeightedPointSet& pts, const DbscanParams& params) {
    params.validate();
    pts.validate();
    const std::size_t n = pts.points.size();
    SubregionPartition part;
    part.labels.assign(n, 0);
    if (n == 0) return part;

    const double eps = params.epsilon;
    const double eps2 = eps * eps;
    const auto& p = pts.points;
    BucketGrid grid(p, eps);

    const auto d2_between = [&](int i, int j) {
        const double dx = p[i].x - p[j].x, dy = p[i].y - p[j].y;
        return dx * dx + dy * dy;
    };

    std::vector<char> core(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        long long w = 0;
        grid.for_candidates(p[i].x, p[i].y, [&](int j) {
            if (d2_between(static_cast<int>(i), j) <= eps2) w += p[j].weight;
        });
        core[i] = w >= params.min_weight;
    }

    // Connected components of core points.
    int next_label = 0;
    std::vector<int> stack;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i] || part.labels[i] != 0) continue;
        part.labels[i] = ++next_label;
        stack.assign(1, static_cast<int>(i));
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            grid.for_candidates(p[u].x, p[u].y, [&](int v) {
                if (!core[v] || part.labels[v] != 0 || d2_between(u, v) > eps2) return;
                part.labels[v] = part.labels[u];
                stack.push_back(v);
            });
        }
    }

    // Border points join the nearest core point within epsilon. Ties break
    // on the core point's (y, x), which for row-major point sets matches
    // the lower-index rule and stays order-independent.
    const auto better = [&](int cand, double cand_d2, int best, double best_d2) {
        if (best < 0 || cand_d2 < best_d2) return true;
        if (cand_d2 > best_d2) return false;
        if (p[cand].y != p[best].y) return p[cand].y < p[best].y;
        return p[cand].x < p[best].x;
    };
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i] || part.labels[i] != 0) continue;
        int best = -1;
        double best_d2 = 0.0;
        grid.for_candidates(p[i].x, p[i].y, [&](int j) {
            if (!core[j]) return;
            const double d = d2_between(static_cast<int>(i), j);
            if (d <= eps2 && better(j, d, best, best_d2)) {
                best = j;
                best_d2 = d;
            }
        });
        if (best >= 0) part.labels[i] = part.labels[best];
    }

    if (next_label == 0) {
        // No core point anywhere: treat the whole set as one subregion so the
        // downstream count constraint degenerates to the global one.
        std::fill(part.labels.begin(), part.labels.end(), 1);
        part.n_subregions = 1;
        return part;
    }

    // Remaining noise merges into the cluster of the nearest labeled point;
    // labels are snapshotted so noise never chains onto noise.
    std::vector<int> snapshot(part.labels);
    std::vector<WeightedPoint> labeled;
    labeled.reserve(n);
    std::vector<int> labeled_idx;
    for (std::size_t i = 0; i < n; ++i) {
        if (snapshot[i] != 0) {
            labeled.push_back(p[i]);
            labeled_idx.push_back(static_cast<int>(i));
        }
    }
    BucketGrid labeled_grid(labeled, eps);
    const int max_ring =
        static_cast<int>(std::ceil(std::max(pts.width, pts.height) / eps)) + 2;
    for (std::size_t i = 0; i < n; ++i) {
        if (part.labels[i] != 0) continue;
        int best = -1;  // index into labeled
        double best_d2 = std::numeric_limits<double>::infinity();
        const int ccx = labeled_grid.coord(p[i].x);
        const int ccy = labeled_grid.coord(p[i].y);
        const auto consider = [&](int j) {
            const double dx = p[i].x - labeled[j].x, dy = p[i].y - labeled[j].y;
            const double d = dx * dx + dy * dy;
            if (best < 0 || d < best_d2) {
                best = j;
                best_d2 = d;
            } else if (d == best_d2) {
                if (labeled[j].y < labeled[best].y ||
                    (labeled[j].y == labeled[best].y && labeled[j].x < labeled[best].x))
                    best = j;
            }
        };
        for (int r = 0; r <= max_ring; ++r) {
            // A cell at Chebyshev ring r holds no point closer than (r-1)*eps.
            if (best >= 0 && (r - 1) * eps > std::sqrt(best_d2)) break;
            if (r == 0) {
                labeled_grid.for_cell(ccx, ccy, consider);
                continue;
            }
            for (int dx = -r; dx <= r; ++dx) {
                labeled_grid.for_cell(ccx + dx, ccy - r, consider);
                labeled_grid.for_cell(ccx + dx, ccy + r, consider);
            }
            for (int dy = -r + 1; dy <= r - 1; ++dy) {
                labeled_grid.for_cell(ccx - r, ccy + dy, consider);
                labeled_grid.for_cell(ccx + r, ccy + dy, consider);
            }
        }
        if (best < 0) {
            for (std::size_t j = 0; j < labeled.size(); ++j)
                consider(static_cast<int>(j));
        }
        part.labels[i] = snapshot[labeled_idx[best]];
    }

    part.n_subregions = next_label;
    return part;
}

LocalizationResult isolated_kmeans(const DensityMap& map, ExpansionFactor f,
                                   const DbscanParams& dbscan_params,
                                   const KMeansParams& kmeans_params,
                                   IsolatedDiagnostics* diag) {
    if (diag) *diag = {};
    const long long k_total = global_cluster_count(map);
    if (diag) diag->k_total = k_total;
    LocalizationResult result;
    if (k_total <= 0) return result;

    const auto canonical_sort = [](std::vector<Center>& centers) {
        std::sort(centers.begin(), centers.end(), [](const Center& a, const Center& b) {
            if (a.mass != b.mass) return a.mass > b.mass;
            if (a.x != b.x) return a.x < b.x;
            return a.y < b.y;
        });
    };

    WeightedPointSet s = build_point_set(map, f);
    if (s.points.empty()) {
        // Frequency rounding wiped every pixel (integral spread over a huge
        // area); fall back to the K strongest pixels so the exact-K contract
        // still holds.
        struct Px {
            double v;
            int x, y;
        };
        std::vector<Px> positive;
        for (int y = 0; y < map.height(); ++y)
            for (int x = 0; x < map.width(); ++x)
                if (map.at(x, y) > 0.0) positive.push_back({map.at(x, y), x, y});
        if (positive.empty()) return result;
        std::sort(positive.begin(), positive.end(), [](const Px& a, const Px& b) {
            if (a.v != b.v) return a.v > b.v;
            if (a.y != b.y) return a.y < b.y;
            return a.x < b.x;
        });
        for (long long i = 0; i < k_total; ++i) {
            const Px& px = positive[static_cast<std::size_t>(i) % positive.size()];
            result.centers.push_back({static_cast<double>(px.x),
                                      static_cast<double>(px.y), 0});
        }
        canonical_sort(result.centers);
        if (diag) {
            diag->n_subregions = 1;
            diag->region_counts.assign(1, k_total);
        }
        return result;
    }

    SubregionPartition part = dbscan(s, dbscan_params);
    const int m = part.n_subregions;
    std::vector<std::vector<int>> members(static_cast<std::size_t>(m));
    std::vector<double> raw(static_cast<std::size_t>(m), 0.0);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        const int id = part.labels[i] - 1;
        members[id].push_back(static_cast<int>(i));
        raw[id] += s.points[i].source_density;
    }

    // Subregions in ascending order of their density mass.
    std::vector<int> order(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (raw[a] != raw[b]) return raw[a] < raw[b];
        return a < b;
    });

    // Per-subregion quotas: rounded local mass everywhere except the last
    // (largest) subregion, which absorbs the remainder.
    std::vector<long long> quota(static_cast<std::size_t>(m), 0);
    long long assigned = 0;
    for (int pos = 0; pos + 1 < m; ++pos) {
        quota[order[pos]] = std::max<long long>(0, std::llround(raw[order[pos]]));
        assigned += quota[order[pos]];
    }
    quota[order[m - 1]] = k_total - assigned;

    // Rounding can overshoot K; strip the deficit from the largest quotas.
    if (quota[order[m - 1]] < 0) {
        long long deficit = -quota[order[m - 1]];
        quota[order[m - 1]] = 0;
        while (deficit > 0) {
            int best = -1;
            for (int pos = 0; pos + 1 < m; ++pos) {
                const int id = order[pos];
                if (quota[id] > 0 && (best < 0 || quota[id] >= quota[best])) best = id;
            }
            --quota[best];
            --deficit;
        }
    }

    // No subregion may ask for more centers than it has distinct points;
    // surplus flows to the largest subregions with spare capacity.
    long long surplus = 0;
    for (int id = 0; id < m; ++id) {
        const long long cap = static_cast<long long>(members[id].size());
        if (quota[id] > cap) {
            surplus += quota[id] - cap;
            quota[id] = cap;
        }
    }
    while (surplus > 0) {
        int best = -1;
        for (int pos = m - 1; pos >= 0; --pos) {
            const int id = order[pos];
            if (static_cast<long long>(members[id].size()) > quota[id]) {
                best = id;
                break;
            }
        }
        if (best < 0) break;  // every distinct point is already a center
        const long long spare =
            static_cast<long long>(members[best].size()) - quota[best];
        const long long take = std::min(spare, surplus);
        quota[best] += take;
        surplus -= take;
    }
    const long long padding = surplus;

    std::vector<int> center_region;
    for (int pos = 0; pos < m; ++pos) {
        const int id = order[pos];
        if (quota[id] == 0) continue;
        WeightedPointSet sub;
        sub.width = s.width;
        sub.height = s.height;
        sub.points.reserve(members[id].size());
        for (int idx : members[id]) sub.points.push_back(s.points[idx]);
        KMeansParams local = kmeans_params;
        local.seed = kmeans_params.seed + static_cast<std::uint64_t>(pos);
        LocalizationResult r = kmeans(sub, quota[id], local);
        for (const Center& c : r.centers) {
            result.centers.push_back(c);
            center_region.push_back(id);
        }
    }

    // Duplicate centers (mass 0) keep the exact-K contract when distinct
    // points run out entirely.
    if (padding > 0) {
        const std::size_t base = result.centers.size();
        for (long long i = 0; i < padding; ++i) {
            const std::size_t src = static_cast<std::size_t>(i % static_cast<long long>(base));
            Center dup = result.centers[src];
            dup.mass = 0;
            result.centers.push_back(dup);
            center_region.push_back(center_region[src]);
        }
    }

    part.region_counts.assign(static_cast<std::size_t>(m), 0);
    for (int id : center_region) ++part.region_counts[id];
    part.order = order;
    if (diag) {
        diag->n_subregions = m;
        diag->region_counts = part.region_counts;
    }

    canonical_sort(result.centers);
    return result;
}

}  // namespace dmap
