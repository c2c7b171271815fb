#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dmap/errors.hpp"

namespace dmap {

struct Point2d {
    double x = 0.0;
    double y = 0.0;
};

// Head-center annotations for one frame. Origin is the top-left corner,
// x runs along columns, y along rows. Duplicate points are permitted.
struct AnnotationSet {
    int width = 0;
    int height = 0;
    std::vector<Point2d> points;

    // Throws ValidationError if the frame is degenerate or a point lies
    // outside [0,width) x [0,height).
    void validate() const;
};

// Dense 2-D grid of non-negative reals, row-major. The integral over the
// grid is the people count. Immutable after construction.
class DensityMap {
public:
    DensityMap() = default;
    DensityMap(int width, int height);  // zero-filled
    DensityMap(int width, int height, std::vector<double> values);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return values_.size(); }

    double at(int x, int y) const {
        return values_[static_cast<std::size_t>(y) * width_ + x];
    }
    const std::vector<double>& values() const { return values_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> values_;
};

// Multiplicative scale applied to all pixel values; always positive.
struct ExpansionFactor {
    explicit ExpansionFactor(double f);
    double factor;
};

double integral_count(const DensityMap& map);

DensityMap expand_values(const DensityMap& map, ExpansionFactor f);

// DMF1 binary format: magic "DMF1", u32 LE width, u32 LE height, then
// width*height IEEE-754 binary32 LE values in row-major order.
DensityMap read_density_map(std::istream& in);
DensityMap read_density_map(const std::string& path);
void write_density_map(const DensityMap& map, std::ostream& out);
void write_density_map(const DensityMap& map, const std::string& path);

// Annotation files are UTF-8 JSON:
//   {"width": int, "height": int, "points": [[x, y], ...]}
AnnotationSet load_annotations(std::istream& in);
AnnotationSet load_annotations(const std::string& path);
void save_annotations(const AnnotationSet& ann, std::ostream& out);
void save_annotations(const AnnotationSet& ann, const std::string& path);

}  // namespace dmap
