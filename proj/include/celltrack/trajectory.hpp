#ifndef CELLTRACK_TRAJECTORY_HPP
#define CELLTRACK_TRAJECTORY_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "celltrack/geometry.hpp"

namespace celltrack {

struct TrajectorySample {
    int frame = 0;
    Vec3 pos;
    double confidence = 1.0;
};

/// One track: (CellID, frame, x, y, z) records with strictly increasing,
/// consecutive frames (no gaps).
struct Trajectory {
    std::int64_t cell_id = 0;
    std::vector<TrajectorySample> samples;

    int first_frame() const { return samples.empty() ? 0 : samples.front().frame; }
    int last_frame() const { return samples.empty() ? -1 : samples.back().frame; }
    std::size_t length() const { return samples.size(); }
};

/// Raised by CSV readers; row is the 1-based line number in the file.
class CsvError : public std::runtime_error {
public:
    CsvError(int row, const std::string& what) : std::runtime_error(what), row_(row) {}
    int row() const { return row_; }

private:
    int row_;
};

/// Trajectory CSV with the exact header "CellID,frame,x,y,z", one row per
/// sample, frames 0-indexed, LF line endings.
void write_trajectories_csv(const std::vector<Trajectory>& tracks, const std::string& path);
std::vector<Trajectory> read_trajectories_csv(const std::string& path);

}  // namespace celltrack

#endif
