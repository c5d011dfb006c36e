#include "sdfsplat/mesh.hpp"

#include "mc_tables.hpp"
#include "ply_internal.hpp"
#include "sdfsplat/error.hpp"
#include "sdfsplat/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <unordered_map>

namespace sdfsplat {

void TriangleMesh::validate() const {
    const auto n = static_cast<long>(vertices.size());
    for (const auto& t : triangles)
        for (int i : t)
            if (i < 0 || i >= n) throw ContractViolation("triangle index out of range");
    if (!vertex_normals.empty() && vertex_normals.size() != vertices.size())
        throw ContractViolation("vertex normal count mismatch");
    if (!vertex_colors.empty() && vertex_colors.size() != vertices.size())
        throw ContractViolation("vertex color count mismatch");
}

double TriangleMesh::area() const {
    double a = 0.0;
    for (const auto& t : triangles)
        a += 0.5 * (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]).norm();
    return a;
}

namespace {

std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
}

std::map<std::uint64_t, int> edge_counts(const TriangleMesh& mesh) {
    std::map<std::uint64_t, int> counts;
    for (const auto& t : mesh.triangles)
        for (int e = 0; e < 3; ++e) ++counts[edge_key(t[e], t[(e + 1) % 3])];
    return counts;
}

}  // namespace

long TriangleMesh::euler_characteristic() const {
    std::vector<bool> used(vertices.size(), false);
    for (const auto& t : triangles)
        for (int i : t) used[static_cast<std::size_t>(i)] = true;
    const long v = std::count(used.begin(), used.end(), true);
    return v - static_cast<long>(edge_counts(*this).size()) + static_cast<long>(triangles.size());
}

bool TriangleMesh::is_watertight() const {
    if (triangles.empty()) return false;
    for (const auto& [key, count] : edge_counts(*this))
        if (count != 2) return false;
    return true;
}

namespace {

constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};

struct SlabOutput {
    std::vector<std::array<std::uint64_t, 3>> triangles;  // global edge ids
    std::unordered_map<std::uint64_t, Vec3> points;
};

// Cut point of the grid edge from (i,j,k) along `axis`; depends only on the edge.
Vec3 edge_point(const SdfGrid& grid, int i, int j, int k, int axis, double iso) {
    int o[3] = {i, j, k};
    o[axis] += 1;
    const Vec3 p0 = grid.vertex(i, j, k), p1 = grid.vertex(o[0], o[1], o[2]);
    const bool s0 = grid.is_sentinel(i, j, k), s1 = grid.is_sentinel(o[0], o[1], o[2]);
    double t = 0.5;
    if (!s0 && !s1) {
        const double v0 = grid.at(i, j, k), v1 = grid.at(o[0], o[1], o[2]);
        t = v1 != v0 ? std::clamp((iso - v0) / (v1 - v0), 0.0, 1.0) : 0.5;
    }
    if (t == 0.0) return p0;
    if (t == 1.0) return p1;
    return p0 + t * (p1 - p0);
}

}  // namespace

TriangleMesh marching_cubes(const SdfGrid& grid, double iso) {
    const int nx = grid.resolution[0], ny = grid.resolution[1], nz = grid.resolution[2];
    if (nx < 2 || ny < 2 || nz < 2 || grid.values.size() != static_cast<std::size_t>(nx) * ny * nz)
        throw ContractViolation("marching_cubes: malformed grid");
    for (std::size_t i = 0; i < grid.values.size(); ++i)
        if (!std::isfinite(grid.values[i])) throw ContractViolation("marching_cubes: non-finite grid value");

    auto inside = [&](int i, int j, int k) { return !grid.is_sentinel(i, j, k) && grid.at(i, j, k) > iso; };
    std::vector<SlabOutput> slabs(static_cast<std::size_t>(nz - 1));
    parallel_for(slabs.size(), [&](std::size_t slab) {
        const int k = static_cast<int>(slab);
        SlabOutput& out = slabs[slab];
        for (int j = 0; j + 1 < ny; ++j)
            for (int i = 0; i + 1 < nx; ++i) {
                int cube = 0;
                for (int c = 0; c < 8; ++c)
                    if (inside(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2])) cube |= 1 << c;
                if (detail::kEdgeTable[cube] == 0) continue;
                std::uint64_t ids[12] = {};
                for (int e = 0; e < 12; ++e) {
                    if (!(detail::kEdgeTable[cube] & (1 << e))) continue;
                    const int* a = kCorner[kEdge[e][0]];
                    const int* b = kCorner[kEdge[e][1]];
                    int base[3], axis = 0;
                    for (int d = 0; d < 3; ++d) {
                        base[d] = std::min(a[d], b[d]);
                        if (a[d] != b[d]) axis = d;
                    }
                    const int bi = i + base[0], bj = j + base[1], bk = k + base[2];
                    ids[e] = 3 * static_cast<std::uint64_t>(grid.index(bi, bj, bk)) + static_cast<std::uint64_t>(axis);
                    if (!out.points.count(ids[e])) out.points.emplace(ids[e], edge_point(grid, bi, bj, bk, axis, iso));
                }
                // Table winding faces the set corners; set corners are inside here, so reverse.
                for (int t = 0; detail::kTriTable[cube][t] != -1; t += 3)
                    out.triangles.push_back(
                        {ids[detail::kTriTable[cube][t]], ids[detail::kTriTable[cube][t + 2]],
                         ids[detail::kTriTable[cube][t + 1]]});
            }
    });

    // Sequential weld: shared edges first, then coincident points within tolerance.
    TriangleMesh mesh;
    std::unordered_map<std::uint64_t, int> by_edge;
    std::unordered_map<std::uint64_t, std::vector<int>> buckets;
    auto bucket_key = [](long long x, long long y, long long z) {
        return static_cast<std::uint64_t>(x) * 73856093ULL ^ static_cast<std::uint64_t>(y) * 19349663ULL ^
               static_cast<std::uint64_t>(z) * 83492791ULL;
    };
    auto weld = [&](const Vec3& p) {
        const long long cx = std::llround(p.x() / kWeldTolerance), cy = std::llround(p.y() / kWeldTolerance),
                        cz = std::llround(p.z() / kWeldTolerance);
        for (long long dx = -1; dx <= 1; ++dx)
            for (long long dy = -1; dy <= 1; ++dy)
                for (long long dz = -1; dz <= 1; ++dz) {
                    auto it = buckets.find(bucket_key(cx + dx, cy + dy, cz + dz));
                    if (it == buckets.end()) continue;
                    for (int v : it->second)
                        if ((mesh.vertices[static_cast<std::size_t>(v)] - p).norm() <= kWeldTolerance) return v;
                }
        const int v = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(p);
        buckets[bucket_key(cx, cy, cz)].push_back(v);
        return v;
    };
    for (const SlabOutput& slab : slabs)
        for (const auto& tri : slab.triangles) {
            std::array<int, 3> t{};
            for (int c = 0; c < 3; ++c) {
                auto it = by_edge.find(tri[c]);
                if (it == by_edge.end()) it = by_edge.emplace(tri[c], weld(slab.points.at(tri[c]))).first;
                t[c] = it->second;
            }
            if (t[0] == t[1] || t[1] == t[2] || t[2] == t[0]) continue;
            const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
            const double area = 0.5 * (mesh.vertices[static_cast<std::size_t>(t[1])] - a)
                                          .cross(mesh.vertices[static_cast<std::size_t>(t[2])] - a)
                                          .norm();
            if (area <= kDegenerateArea) continue;
            mesh.triangles.push_back(t);
        }

    // Drop vertices no surviving triangle references.
    std::vector<int> remap(mesh.vertices.size(), -1);
    std::vector<Vec3> kept;
    for (auto& t : mesh.triangles)
        for (int& i : t) {
            auto& r = remap[static_cast<std::size_t>(i)];
            if (r < 0) {
                r = static_cast<int>(kept.size());
                kept.push_back(mesh.vertices[static_cast<std::size_t>(i)]);
            }
            i = r;
        }
    mesh.vertices = std::move(kept);

    mesh.vertex_normals.assign(mesh.vertices.size(), Vec3::Zero());
    for (const auto& t : mesh.triangles) {
        const Vec3 n = (mesh.vertices[static_cast<std::size_t>(t[1])] - mesh.vertices[static_cast<std::size_t>(t[0])])
                           .cross(mesh.vertices[static_cast<std::size_t>(t[2])] - mesh.vertices[static_cast<std::size_t>(t[0])]);
        for (int i : t) mesh.vertex_normals[static_cast<std::size_t>(i)] += n;
    }
    for (Vec3& n : mesh.vertex_normals) {
        const double len = n.norm();
        n = len > 0.0 ? Vec3(n / len) : Vec3::Zero();
    }
    return mesh;
}

namespace {

double sample_channel(const Image& img, double u, double v, int c) {
    const double x = std::clamp(u - 0.5, 0.0, img.width - 1.0), y = std::clamp(v - 0.5, 0.0, img.height - 1.0);
    const int x0 = std::min(static_cast<int>(x), img.width - 1), y0 = std::min(static_cast<int>(y), img.height - 1);
    const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
    const double fx = x - x0, fy = y - y0;
    return (1 - fy) * ((1 - fx) * img(x0, y0, c) + fx * img(x1, y0, c)) +
           fy * ((1 - fx) * img(x0, y1, c) + fx * img(x1, y1, c));
}

}  // namespace

TriangleMesh color_mesh(const TriangleMesh& mesh, const GaussianSet& gaussians, std::span<const Camera> cameras,
                        const RenderConfig& cfg) {
    mesh.validate();
    TriangleMesh out = mesh;
    const std::size_t n = mesh.vertices.size();
    std::vector<Vec3> normals = mesh.vertex_normals;
    if (normals.size() != n) {
        normals.assign(n, Vec3::Zero());
        for (const auto& t : mesh.triangles) {
            const Vec3 fn = (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
            for (int i : t) normals[static_cast<std::size_t>(i)] += fn;
        }
        for (Vec3& v : normals)
            if (v.norm() > 0.0) v.normalize();
    }

    std::vector<double> best(n, 0.0);
    std::vector<Vec3> color(n, Vec3::Zero());
    std::vector<bool> colored(n, false);
    for (const Camera& cam : cameras) {
        const FrameBuffer fb = render(gaussians, cam, cfg);
        parallel_for(n, [&](std::size_t i) {
            const Vec3& p = mesh.vertices[i];
            const Vec3 q = cam.to_view(p);
            if (!(q.z() > cam.near && q.z() < cam.far)) return;
            const double u = cam.fx * q.x() / q.z() + cam.cx, v = cam.fy * q.y() / q.z() + cam.cy;
            if (!(u >= 0.0 && u < cam.width && v >= 0.0 && v < cam.height)) return;
            const double facing = normals[i].dot((cam.center() - p).normalized());
            if (!(facing > best[i])) return;
            const double a = sample_channel(fb.alpha, u, v, 0);
            if (!(a > 0.5)) return;
            const double surface = sample_channel(fb.depth, u, v, 0) / a;
            if (std::abs(surface - q.z()) > 0.01 * q.z()) return;
            best[i] = facing;
            for (int c = 0; c < 3; ++c) color[i][c] = std::clamp(sample_channel(fb.color, u, v, c), 0.0, 1.0);
            colored[i] = true;
        }, 256);
    }

    std::vector<std::vector<int>> neighbors(n);
    for (const auto& t : mesh.triangles)
        for (int e = 0; e < 3; ++e) {
            neighbors[static_cast<std::size_t>(t[e])].push_back(t[(e + 1) % 3]);
            neighbors[static_cast<std::size_t>(t[(e + 1) % 3])].push_back(t[e]);
        }
    for (bool changed = true; changed;) {
        changed = false;
        std::vector<bool> next = colored;
        std::vector<Vec3> next_color = color;
        for (std::size_t i = 0; i < n; ++i) {
            if (colored[i]) continue;
            Vec3 sum = Vec3::Zero();
            int count = 0;
            for (int j : neighbors[i])
                if (colored[static_cast<std::size_t>(j)]) sum += color[static_cast<std::size_t>(j)], ++count;
            if (count == 0) continue;
            next_color[i] = sum / count;
            next[i] = true;
            changed = true;
        }
        colored.swap(next);
        color.swap(next_color);
    }
    for (std::size_t i = 0; i < n; ++i)
        if (!colored[i]) color[i] = Vec3::Constant(0.5);
    out.vertex_colors = std::move(color);
    return out;
}

std::vector<Vec3> sample_mesh(const TriangleMesh& mesh, std::size_t n, std::mt19937_64& rng) {
    if (mesh.empty()) throw InvalidParameter("cannot sample an empty mesh");
    std::vector<double> cumulative;
    cumulative.reserve(mesh.triangles.size());
    double total = 0.0;
    for (const auto& t : mesh.triangles) {
        total += 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]]).cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]).norm();
        cumulative.push_back(total);
    }
    if (!(total > 0.0)) throw InvalidParameter("cannot sample a mesh with zero area");
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<Vec3> out;
    out.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        const double r = uni(rng) * total;
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), r);
        const auto& t = mesh.triangles[std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                                             mesh.triangles.size() - 1)];
        const double su = std::sqrt(uni(rng)), v = uni(rng);
        out.push_back((1 - su) * mesh.vertices[t[0]] + su * (1 - v) * mesh.vertices[t[1]] + su * v * mesh.vertices[t[2]]);
    }
    return out;
}

namespace {
constexpr std::uint32_t kLeafSize = 8;
}

KdTree::KdTree(std::vector<Vec3> points) : points_(std::move(points)) {
    if (points_.empty()) throw InvalidParameter("KdTree needs at least one point");
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(2 * points_.size() / kLeafSize + 1);
    build(0, static_cast<std::uint32_t>(points_.size()));
}

std::uint32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    if (end - begin <= kLeafSize) {
        nodes_[id].begin = begin;
        nodes_[id].end = end;
        return id;
    }
    Vec3 lo = points_[order_[begin]], hi = lo;
    for (std::uint32_t i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) {
                         return points_[a][axis] < points_[b][axis] || (points_[a][axis] == points_[b][axis] && a < b);
                     });
    const double split = points_[order_[mid]][axis];
    const std::uint32_t left = build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

void KdTree::search(std::uint32_t node_id, const Vec3& q, std::size_t& best, double& best_d2) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
        for (std::uint32_t i = node.begin; i < node.end; ++i) {
            const std::uint32_t idx = order_[i];
            const double d2 = (points_[idx] - q).squaredNorm();
            if (d2 < best_d2 || (d2 == best_d2 && idx < best)) {
                best_d2 = d2;
                best = idx;
            }
        }
        return;
    }
    // Left holds coordinates <= split, right holds coordinates >= split.
    const double diff = q[node.axis] - node.split;
    const std::uint32_t near = diff < 0.0 ? node.left : node.right;
    const std::uint32_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, best, best_d2);
    if (diff * diff <= best_d2) search(far, q, best, best_d2);
}

std::size_t KdTree::nearest(const Vec3& q) const {
    std::size_t best = points_.size();
    double best_d2 = std::numeric_limits<double>::infinity();
    search(0, q, best, best_d2);
    return best;
}

namespace {

double mean_nearest(std::span<const Vec3> from, const KdTree& tree) {
    std::vector<double> d(from.size());
    parallel_for(from.size(), [&](std::size_t i) { d[i] = (tree.points()[tree.nearest(from[i])] - from[i]).norm(); }, 256);
    double sum = 0.0;
    for (double x : d) sum += x;
    return sum / static_cast<double>(from.size());
}

}  // namespace

double chamfer_distance(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw InvalidParameter("chamfer_distance needs two non-empty point sets");
    const KdTree ta(std::vector<Vec3>(a.begin(), a.end()));
    const KdTree tb(std::vector<Vec3>(b.begin(), b.end()));
    return 0.5 * (mean_nearest(a, tb) + mean_nearest(b, ta));
}

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
    mesh.validate();
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << std::setprecision(17);
    for (const Vec3& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    const bool normals = !mesh.vertex_normals.empty();
    for (const Vec3& n : mesh.vertex_normals) out << "vn " << n.x() << ' ' << n.y() << ' ' << n.z() << '\n';
    for (const auto& t : mesh.triangles) {
        out << 'f';
        for (int i : t) {
            out << ' ' << i + 1;
            if (normals) out << "//" << i + 1;
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

namespace {

void put_float(std::ostream& out, double v) {
    const auto f = static_cast<float>(v);
    out.write(reinterpret_cast<const char*>(&f), sizeof f);
}

std::uint8_t to_byte(double c) { return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0)); }

}  // namespace

void write_mesh_ply(const TriangleMesh& mesh, const std::filesystem::path& path) {
    mesh.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << mesh.vertices.size() << "\n";
    for (const char* n : {"x", "y", "z", "nx", "ny", "nz"}) out << "property float " << n << "\n";
    for (const char* n : {"red", "green", "blue"}) out << "property uchar " << n << "\n";
    out << "element face " << mesh.triangles.size() << "\nproperty list uchar int vertex_indices\nend_header\n";
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        for (int k = 0; k < 3; ++k) put_float(out, mesh.vertices[i][k]);
        const Vec3 n = mesh.vertex_normals.empty() ? Vec3::Zero() : mesh.vertex_normals[i];
        for (int k = 0; k < 3; ++k) put_float(out, n[k]);
        const Vec3 c = mesh.vertex_colors.empty() ? Vec3::Constant(0.5) : mesh.vertex_colors[i];
        for (int k = 0; k < 3; ++k) {
            const std::uint8_t b = to_byte(c[k]);
            out.write(reinterpret_cast<const char*>(&b), 1);
        }
    }
    for (const auto& t : mesh.triangles) {
        const std::uint8_t three = 3;
        out.write(reinterpret_cast<const char*>(&three), 1);
        for (int i : t) {
            const auto v = static_cast<std::int32_t>(i);
            out.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
    }
    if (!out) throw IoError("failed writing " + path.string());
}

namespace {

std::vector<Vec3> read_vec3(std::istream& in, const detail::PlyElement& e, const std::array<const char*, 3>& names,
                            std::vector<unsigned char>& records, const std::string& src) {
    const detail::PlyProperty* p[3];
    for (int k = 0; k < 3; ++k) {
        p[k] = e.find(names[static_cast<std::size_t>(k)]);
        if (!p[k]) throw FormatError(src + ": missing property " + names[static_cast<std::size_t>(k)]);
    }
    if (records.empty()) {
        records.resize(e.count * e.stride);
        in.read(reinterpret_cast<char*>(records.data()), static_cast<std::streamsize>(records.size()));
        if (!in) throw FormatError(src + ": truncated vertex data");
    }
    std::vector<Vec3> out(e.count);
    for (std::size_t i = 0; i < e.count; ++i)
        for (int k = 0; k < 3; ++k) out[i][k] = detail::read_ply_scalar(records.data() + i * e.stride, *p[k]);
    return out;
}

}  // namespace

TriangleMesh read_mesh_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    const std::string src = path.string();
    const detail::PlyHeader header = detail::read_ply_header(in, src);
    if (header.elements.size() != 2 || header.elements[0].name != "vertex" || header.elements[1].name != "face")
        throw FormatError(src + ": expected vertex and face elements");
    const detail::PlyElement& v = header.elements[0];
    std::vector<unsigned char> records;
    TriangleMesh mesh;
    mesh.vertices = read_vec3(in, v, {"x", "y", "z"}, records, src);
    mesh.vertex_normals = read_vec3(in, v, {"nx", "ny", "nz"}, records, src);
    mesh.vertex_colors = read_vec3(in, v, {"red", "green", "blue"}, records, src);
    for (Vec3& c : mesh.vertex_colors) c /= 255.0;
    for (std::size_t f = 0; f < header.elements[1].count; ++f) {
        std::uint8_t count = 0;
        in.read(reinterpret_cast<char*>(&count), 1);
        if (!in || count != 3) throw FormatError(src + ": only triangle faces are supported");
        std::int32_t idx[3];
        in.read(reinterpret_cast<char*>(idx), sizeof idx);
        if (!in) throw FormatError(src + ": truncated face data");
        mesh.triangles.push_back({idx[0], idx[1], idx[2]});
    }
    mesh.validate();
    return mesh;
}

void write_oriented_points(const OrientedPointCloud& cloud, const std::filesystem::path& path) {
    if (cloud.empty()) throw InvalidParameter("refusing to write an empty point cloud");
    cloud.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size() << "\n";
    for (const char* n : {"x", "y", "z", "nx", "ny", "nz"}) out << "property float " << n << "\n";
    out << "end_header\n";
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        for (int k = 0; k < 3; ++k) put_float(out, cloud.positions[i][k]);
        for (int k = 0; k < 3; ++k) put_float(out, cloud.normals[i][k]);
    }
    if (!out) throw IoError("failed writing " + path.string());
}

OrientedPointCloud read_oriented_points(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    const std::string src = path.string();
    const detail::PlyHeader header = detail::read_ply_header(in, src);
    if (header.elements.empty() || header.elements[0].name != "vertex" || header.elements[0].has_list)
        throw FormatError(src + ": expected a vertex element first");
    std::vector<unsigned char> records;
    OrientedPointCloud cloud;
    cloud.positions = read_vec3(in, header.elements[0], {"x", "y", "z"}, records, src);
    cloud.normals = read_vec3(in, header.elements[0], {"nx", "ny", "nz"}, records, src);
    cloud.validate();
    return cloud;
}

}  // namespace sdfsplat
