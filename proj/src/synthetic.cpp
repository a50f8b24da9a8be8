#include "rotadapt/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "rotadapt/errors.hpp"

namespace rotadapt {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Seg {
    double x1, y1, x2, y2;
};

// Canonical glyph geometry on a [0,10]^2 box, y pointing up, drawn upright.
// The first 8 glyphs are the class alphabet; none of them is similar to
// itself under 90/180/270-degree rotation. The last 4 are distractors (Z and
// O are rotation-symmetric, which is fine — they are never class targets).
const std::vector<std::vector<Seg>>& glyph_table() {
    static const std::vector<std::vector<Seg>> t = {
        // arrow (up)
        {{5, 1, 5, 9}, {5, 9, 2, 6}, {5, 9, 8, 6}},
        // tee
        {{1, 9, 9, 9}, {5, 9, 5, 1}},
        // ell
        {{2, 9, 2, 1}, {2, 1, 8, 1}},
        // e
        {{2, 1, 2, 9}, {2, 9, 8, 9}, {2, 5, 7, 5}, {2, 1, 8, 1}},
        // f
        {{2, 1, 2, 9}, {2, 9, 8, 9}, {2, 5, 7, 5}},
        // j
        {{3, 9, 9, 9}, {7, 9, 7, 2}, {7, 2, 3, 2}, {3, 2, 3, 4}},
        // p
        {{3, 1, 3, 9}, {3, 9, 7, 9}, {7, 9, 7, 5}, {7, 5, 3, 5}},
        // h
        {{3, 1, 3, 9}, {3, 5, 7, 5}, {7, 5, 7, 1}},
        // z (distractor)
        {{2, 9, 8, 9}, {8, 9, 2, 1}, {2, 1, 8, 1}},
        // u (distractor)
        {{2, 9, 2, 2}, {2, 2, 8, 2}, {8, 2, 8, 9}},
        // w (distractor)
        {{2, 9, 3.5, 1}, {3.5, 1, 5, 6}, {5, 6, 6.5, 1}, {6.5, 1, 8, 9}},
        // o (distractor)
        {{2, 2, 8, 2}, {8, 2, 8, 8}, {8, 8, 2, 8}, {2, 8, 2, 2}},
    };
    return t;
}

double point_segment_dist(double px, double py, const Seg& s) {
    const double dx = s.x2 - s.x1, dy = s.y2 - s.y1;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((px - s.x1) * dx + (py - s.y1) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double cx = s.x1 + t * dx, cy = s.y1 + t * dy;
    return std::hypot(px - cx, py - cy);
}

struct Pose {
    double theta = 0.0;   // radians, counter-clockwise in canonical space
    double scale = 2.0;   // pixels per canonical unit
    double cx = 16.0, cy = 16.0;
    double stroke = 1.5;  // stroke radius in pixels
};

// Segments transformed into pixel coordinates (y down).
std::vector<Seg> place(const std::vector<Seg>& glyph, const Pose& p) {
    const double c = std::cos(p.theta), s = std::sin(p.theta);
    std::vector<Seg> out;
    out.reserve(glyph.size());
    for (const Seg& g : glyph) {
        auto map = [&](double gx, double gy, double& px, double& py) {
            const double x = gx - 5.0, y = gy - 5.0;
            const double xr = c * x - s * y, yr = s * x + c * y;
            px = p.cx + xr * p.scale;
            py = p.cy - yr * p.scale;
        };
        Seg o{};
        map(g.x1, g.y1, o.x1, o.y1);
        map(g.x2, g.y2, o.x2, o.y2);
        out.push_back(o);
    }
    return out;
}

double min_dist(double px, double py, const std::vector<Seg>& segs) {
    double d = 1e30;
    for (const Seg& s : segs) d = std::min(d, point_segment_dist(px, py, s));
    return d;
}

double coverage_fill(double d, double stroke, double aa) {
    return std::clamp(0.5 + (stroke - d) / aa, 0.0, 1.0);
}

double coverage_ring(double d, double stroke, double band, double aa) {
    return std::clamp(0.5 + (band - std::abs(d - stroke)) / aa, 0.0, 1.0);
}

Image render(int glyph, bool source_style, int size, double noise_deg, Rng& rng) {
    const double u = size / 32.0;
    Pose pose;
    pose.theta = rng.uniform(-noise_deg, noise_deg) * kPi / 180.0;
    pose.scale = (size / 16.0) * rng.uniform(0.85, 1.1);
    pose.cx = size / 2.0 + rng.uniform(-2.0, 2.0) * u;
    pose.cy = size / 2.0 + rng.uniform(-2.0, 2.0) * u;
    pose.stroke = 1.5 * u * rng.uniform(0.9, 1.15);
    const double band = 0.6 * u;
    const double aa = 0.7 * u;
    const std::vector<Seg> segs = place(glyph_table()[glyph], pose);

    double ink[3], tint[3];
    Image img(size, size, 3);
    if (source_style) {
        const double v0 = rng.uniform(0.05, 0.3);
        for (double& c : ink) c = v0 + rng.uniform(-0.05, 0.05);
        const double b0 = rng.uniform(0.72, 0.92);
        const double phi = rng.uniform(0.0, 2.0 * kPi);
        const double amp = rng.uniform(0.05, 0.15);
        for (double& c : tint) c = rng.uniform(-0.04, 0.04);
        const double gx = std::cos(phi), gy = std::sin(phi);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double along =
                    ((x + 0.5) * gx + (y + 0.5) * gy) / (size * std::sqrt(2.0));
                const double bg = b0 + amp * 2.0 * along;
                const double cov =
                    coverage_fill(min_dist(x + 0.5, y + 0.5, segs), pose.stroke, aa);
                for (int c = 0; c < 3; ++c) {
                    const double v = (1 - cov) * (bg + tint[c]) + cov * ink[c] +
                                     rng.uniform(-0.02, 0.02);
                    img.at(c, y, x) = std::clamp(v, 0.0, 1.0);
                }
            }
    } else {
        const double v0 = rng.uniform(0.82, 0.98);
        for (double& c : ink) c = v0 + rng.uniform(-0.06, 0.0);
        const double m0 = rng.uniform(0.42, 0.58);
        const double amp = rng.uniform(0.08, 0.16);
        const double fx = rng.uniform(0.07, 0.2), fy = rng.uniform(0.07, 0.2);
        const double p1 = rng.uniform(0.0, 1.0), p2 = rng.uniform(0.0, 1.0);
        for (double& c : tint) c = rng.uniform(-0.04, 0.04);
        for (int y = 0; y < size; ++y)
            for (int x = 0; x < size; ++x) {
                const double bg = m0 + amp * std::sin(2 * kPi * (fx * x + p1)) *
                                           std::sin(2 * kPi * (fy * y + p2));
                const double cov = coverage_ring(min_dist(x + 0.5, y + 0.5, segs),
                                                 pose.stroke, band, aa);
                for (int c = 0; c < 3; ++c) {
                    const double v = (1 - cov) * (bg + tint[c]) + cov * ink[c] +
                                     rng.uniform(-0.02, 0.02);
                    img.at(c, y, x) = std::clamp(v, 0.0, 1.0);
                }
            }
    }
    return img;
}

std::string pad4(int v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", v);
    return buf;
}

}  // namespace

const std::vector<std::string>& glyph_names() {
    static const std::vector<std::string> names = {"arrow", "tee", "ell", "e", "f", "j",
                                                   "p",     "h",   "z",   "u", "w", "o"};
    return names;
}

Image glyph_template(int glyph, int size) {
    if (glyph < 0 || glyph >= static_cast<int>(glyph_table().size()))
        throw InputError("glyph_template: glyph index out of range");
    if (size < 8) throw InputError("glyph_template: size too small");
    const double u = size / 32.0;
    Pose pose;
    pose.theta = 0.0;
    pose.scale = size / 16.0;
    pose.cx = pose.cy = size / 2.0;
    pose.stroke = 1.5 * u;
    const std::vector<Seg> segs = place(glyph_table()[glyph], pose);
    Image img(size, size, 1);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            img.at(0, y, x) =
                coverage_fill(min_dist(x + 0.5, y + 0.5, segs), pose.stroke, 0.7 * u);
    return img;
}

void SyntheticSpec::validate() const {
    const int max_glyphs = static_cast<int>(glyph_table().size());
    if (num_classes < 2 || num_classes > 8)
        throw ConfigError("synthetic: num_classes must be in [2,8]");
    if (num_distractors < 0 || num_classes + num_distractors > max_glyphs)
        throw ConfigError("synthetic: num_distractors must be in [0, " +
                          std::to_string(max_glyphs - num_classes) + "]");
    if (image_size < 16) throw ConfigError("synthetic: image_size must be >= 16");
    if (source_per_class < 1 || target_per_class < 1)
        throw ConfigError("synthetic: per-class counts must be >= 1");
    if (source_test_per_class < 0 || distractor_per_class < 0)
        throw ConfigError("synthetic: per-class counts must be nonnegative");
    if (orientation_noise_deg < 0.0 || orientation_noise_deg > 45.0)
        throw ConfigError("synthetic: orientation_noise_deg must be in [0,45]");
}

SyntheticPair generate_synthetic_pair(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    SyntheticPair pair;

    auto emit = [&](Pool& pool, int glyph, int index, bool source_style, int label) {
        Example ex;
        ex.image = render(glyph, source_style, spec.image_size, spec.orientation_noise_deg,
                          rng);
        ex.label = label;
        ex.domain = source_style ? Domain::source : Domain::target;
        const std::string& name = glyph_names()[glyph];
        ex.id = std::string(source_style ? "source/" : "target/") + name + "/" + name + "_" +
                pad4(index) + ".ppm";
        pool.push_back(std::move(ex));
    };

    for (int g = 0; g < spec.num_classes; ++g)
        for (int i = 0; i < spec.source_per_class; ++i)
            emit(pair.source_train, g, i, true, g);
    for (int g = 0; g < spec.num_classes; ++g)
        for (int i = 0; i < spec.source_test_per_class; ++i)
            emit(pair.source_test, g, spec.source_per_class + i, true, g);
    for (int g = 0; g < spec.num_classes; ++g)
        for (int i = 0; i < spec.target_per_class; ++i)
            emit(pair.target, g, i, false, g);
    for (int d = 0; d < spec.num_distractors; ++d)
        for (int i = 0; i < spec.distractor_per_class; ++i)
            emit(pair.distractors, spec.num_classes + d, i, false, spec.num_classes + d);
    return pair;
}

}  // namespace rotadapt
