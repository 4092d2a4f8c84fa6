#pragma once

#include "pointproc/error.hpp"
#include "pointproc/io_util.hpp"

#include <json.hpp>

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace pointproc {

/// Per-node event timestamps observed on the half-open horizon [0, end_time).
///
/// Construction validates every invariant: at least one node, end_time > 0
/// and finite, each node's timestamps strictly increasing and inside the
/// horizon. Objects are immutable afterwards.
class EventRealization {
public:
    EventRealization(double end_time, std::vector<std::vector<double>> timestamps)
        : end_time_(end_time), timestamps_(std::move(timestamps)) {
        validate();
    }

    // dim nodes without any event.
    static EventRealization empty(std::size_t dim, double end_time) {
        return EventRealization(end_time, std::vector<std::vector<double>>(dim));
    }

    std::size_t dim() const noexcept { return timestamps_.size(); }
    double end_time() const noexcept { return end_time_; }

    std::span<const double> node(std::size_t i) const { return timestamps_.at(i); }
    const std::vector<std::vector<double>>& timestamps() const noexcept { return timestamps_; }

    std::size_t count(std::size_t i) const { return timestamps_.at(i).size(); }

    std::size_t total_events() const noexcept {
        std::size_t n = 0;
        for (const auto& ts : timestamps_) {
            n += ts.size();
        }
        return n;
    }

    friend bool operator==(const EventRealization&, const EventRealization&) = default;

private:
    void validate() const {
        if (timestamps_.empty()) {
            throw data_error("event realization needs at least one node");
        }
        if (!(end_time_ > 0.0) || !std::isfinite(end_time_)) {
            throw data_error("end_time must be positive and finite");
        }
        for (std::size_t i = 0; i < timestamps_.size(); ++i) {
            const auto& ts = timestamps_[i];
            for (std::size_t k = 0; k < ts.size(); ++k) {
                const double t = ts[k];
                if (!std::isfinite(t) || t < 0.0) {
                    throw data_error("node " + std::to_string(i) + ": timestamp below 0 or not finite");
                }
                if (t >= end_time_) {
                    throw data_error("node " + std::to_string(i) + ": timestamp >= end_time");
                }
                if (k > 0 && !(t > ts[k - 1])) {
                    throw data_error("node " + std::to_string(i) + ": non-monotone timestamps");
                }
            }
        }
    }

    double end_time_;
    std::vector<std::vector<double>> timestamps_;
};

inline nlohmann::json events_to_json(const EventRealization& r) {
    nlohmann::json j;
    j["version"] = 1;
    j["dim"] = r.dim();
    j["end_time"] = r.end_time();
    j["timestamps"] = r.timestamps();
    return j;
}

inline EventRealization events_from_json(const nlohmann::json& j) {
    try {
        if (j.at("version").get<int>() != 1) {
            throw data_error("unsupported event file version");
        }
        const auto dim = j.at("dim").get<std::size_t>();
        const auto end_time = j.at("end_time").get<double>();
        auto ts = j.at("timestamps").get<std::vector<std::vector<double>>>();
        if (ts.size() != dim) {
            throw data_error("dim mismatch: dim=" + std::to_string(dim) + " but " +
                             std::to_string(ts.size()) + " timestamp lists");
        }
        return EventRealization(end_time, std::move(ts));
    } catch (const nlohmann::json::exception& e) {
        throw data_error(std::string("malformed event file: ") + e.what());
    }
}

inline EventRealization load_events(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw data_error(path.string() + ": parse failure: " + e.what());
    }
    return events_from_json(j);
}

// nlohmann emits the shortest decimal that round-trips, so load(save(r)) == r bitwise.
inline void save_events(const EventRealization& r, const std::filesystem::path& path) {
    io::write_file_atomic(path, events_to_json(r).dump() + "\n");
}

} // namespace pointproc
