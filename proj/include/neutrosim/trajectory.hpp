#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "neutrosim/error.hpp"

namespace neutrosim {

enum class Condition : std::uint32_t { Normal = 0, Inhibited = 1 };

inline const char* condition_name(Condition c) {
    return c == Condition::Normal ? "normal" : "inhibited";
}

inline Condition parse_condition(const std::string& s) {
    if (s == "normal") return Condition::Normal;
    if (s == "inhibited") return Condition::Inhibited;
    throw InvalidArgument("motion-ar", "unknown condition '" + s + "'");
}

struct Point2 {
    double x = 0;
    double y = 0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

/// Cell-center positions in pixels, one per frame, on consecutive frames
/// starting at `first_frame`.
struct Trajectory {
    std::string cell_id;
    Condition condition = Condition::Normal;
    std::int64_t first_frame = 0;
    double frame_rate = 20.0;
    std::vector<Point2> points;

    std::size_t size() const noexcept { return points.size(); }
    std::int64_t frame(std::size_t i) const { return first_frame + static_cast<std::int64_t>(i); }
    double timestamp(std::size_t i) const { return static_cast<double>(frame(i)) / frame_rate; }

    void validate() const {
        if (points.size() < 2)
            throw InvalidArgument("motion-ar", "trajectory '" + cell_id + "' has fewer than 2 points");
        if (!(frame_rate > 0))
            throw InvalidArgument("motion-ar", "frame rate must be positive");
    }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

}  // namespace neutrosim
