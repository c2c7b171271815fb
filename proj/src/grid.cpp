#include "dmap/grid.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

namespace dmap {

void AnnotationSet::validate() const {
    if (width < 1 || height < 1)
        throw ValidationError("annotation frame must have positive dimensions");
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Point2d& p = points[i];
        if (!std::isfinite(p.x) || !std::isfinite(p.y) ||
            p.x < 0.0 || p.x >= static_cast<double>(width) ||
            p.y < 0.0 || p.y >= static_cast<double>(height)) {
            throw ValidationError("point outside [0,width) x [0,height)",
                                  static_cast<std::int64_t>(i));
        }
    }
}

DensityMap::DensityMap(int width, int height)
    : DensityMap(width, height,
                 std::vector<double>(static_cast<std::size_t>(width > 0 ? width : 0) *
                                         (height > 0 ? height : 0),
                                     0.0)) {}

DensityMap::DensityMap(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
    if (width_ < 1 || height_ < 1)
        throw ValidationError("density map must have positive dimensions");
    if (values_.size() != static_cast<std::size_t>(width_) * height_)
        throw ValidationError("value count does not match width*height");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]) || values_[i] < 0.0)
            throw ValidationError("density value must be finite and non-negative",
                                  static_cast<std::int64_t>(i));
    }
}

ExpansionFactor::ExpansionFactor(double f) : factor(f) {
    if (!std::isfinite(f) || f <= 0.0)
        throw InvalidParameter("expansion factor must be finite and positive");
}

double integral_count(const DensityMap& map) {
    // Kahan summation; maps can hold a million small values.
    double sum = 0.0, comp = 0.0;
    for (double v : map.values()) {
        const double y = v - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    return sum;
}

DensityMap expand_values(const DensityMap& map, ExpansionFactor f) {
    std::vector<double> out(map.values());
    for (double& v : out) v *= f.factor;
    return DensityMap(map.width(), map.height(), std::move(out));
}

namespace {

constexpr char kMagic[4] = {'D', 'M', 'F', '1'};
constexpr std::uint64_t kMaxPixels = std::uint64_t{1} << 30;

std::uint32_t read_u32_le(const unsigned char* b) {
    return static_cast<std::uint32_t>(b[0]) |
           static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 |
           static_cast<std::uint32_t>(b[3]) << 24;
}

void write_u32_le(std::uint32_t v, std::ostream& out) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

DensityMap read_density_map(std::istream& in) {
    unsigned char header[12];
    in.read(reinterpret_cast<char*>(header), 12);
    const std::uint64_t got = static_cast<std::uint64_t>(in.gcount());
    if (got < 4 || std::memcmp(header, kMagic, 4) != 0)
        throw FormatError("bad magic, expected \"DMF1\"", 0);
    if (got < 12)
        throw FormatError("truncated header", got);
    const std::uint32_t w = read_u32_le(header + 4);
    const std::uint32_t h = read_u32_le(header + 8);
    if (w == 0)
        throw FormatError("zero width", 4);
    if (h == 0)
        throw FormatError("zero height", 8);
    if (static_cast<std::uint64_t>(w) * h > kMaxPixels)
        throw FormatError("dimension overflow", 4);

    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<unsigned char> buf(n * 4);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * 4));
    const std::uint64_t payload = static_cast<std::uint64_t>(in.gcount());
    if (payload < n * 4)
        throw FormatError("truncated payload", 12 + payload);

    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float f = std::bit_cast<float>(read_u32_le(&buf[i * 4]));
        if (!std::isfinite(f) || f < 0.0f)
            throw FormatError("non-finite or negative density value", 12 + i * 4);
        values[i] = static_cast<double>(f);
    }
    return DensityMap(static_cast<int>(w), static_cast<int>(h), std::move(values));
}

DensityMap read_density_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open density map file: " + path);
    return read_density_map(in);
}

void write_density_map(const DensityMap& map, std::ostream& out) {
    out.write(kMagic, 4);
    write_u32_le(static_cast<std::uint32_t>(map.width()), out);
    write_u32_le(static_cast<std::uint32_t>(map.height()), out);
    for (double v : map.values())
        write_u32_le(std::bit_cast<std::uint32_t>(static_cast<float>(v)), out);
    if (!out) throw Error("failed writing density map");
}

void write_density_map(const DensityMap& map, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open output file: " + path);
    write_density_map(map, out);
}

AnnotationSet load_annotations(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed annotation document: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("width") || !doc.contains("height") ||
        !doc.contains("points") || !doc["width"].is_number_integer() ||
        !doc["height"].is_number_integer() || !doc["points"].is_array())
        throw ValidationError("annotation document must be "
                              "{\"width\": int, \"height\": int, \"points\": [[x,y],...]}");

    AnnotationSet ann;
    ann.width = doc["width"].get<int>();
    ann.height = doc["height"].get<int>();
    const auto& pts = doc["points"];
    ann.points.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const auto& p = pts[i];
        if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
            throw ValidationError("point must be a [x, y] pair of numbers",
                                  static_cast<std::int64_t>(i));
        ann.points.push_back({p[0].get<double>(), p[1].get<double>()});
    }
    ann.validate();
    return ann;
}

AnnotationSet load_annotations(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open annotation file: " + path);
    return load_annotations(in);
}

void save_annotations(const AnnotationSet& ann, std::ostream& out) {
    ann.validate();
    nlohmann::json doc;
    doc["width"] = ann.width;
    doc["height"] = ann.height;
    auto pts = nlohmann::json::array();
    for (const Point2d& p : ann.points) pts.push_back({p.x, p.y});
    doc["points"] = std::move(pts);
    out << doc.dump() << '\n';
    if (!out) throw Error("failed writing annotations");
}

void save_annotations(const AnnotationSet& ann, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open output file: " + path);
    save_annotations(ann, out);
}

}  // namespace dmap
