#include "celltrack/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>

#include "celltrack/volume.hpp"

namespace celltrack {

namespace {

const char* kHeader = "CellID,frame,x,y,z";

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

bool parse_i64(const std::string& s, std::int64_t& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

}  // namespace

void write_trajectories_csv(const std::vector<Trajectory>& tracks, const std::string& path) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw VolumeIoError(VolumeIoError::Kind::OpenFailed, "cannot open for write: " + path);
    std::fprintf(fp, "%s\n", kHeader);
    for (const auto& t : tracks) {
        for (const auto& s : t.samples) {
            std::fprintf(fp, "%lld,%d,%.6f,%.6f,%.6f\n", static_cast<long long>(t.cell_id), s.frame,
                         s.pos.x, s.pos.y, s.pos.z);
        }
    }
    if (std::fclose(fp) != 0) {
        throw VolumeIoError(VolumeIoError::Kind::WriteFailed, "short write: " + path);
    }
}

std::vector<Trajectory> read_trajectories_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw VolumeIoError(VolumeIoError::Kind::OpenFailed, "cannot open: " + path);

    std::string line;
    int row = 0;
    if (!std::getline(in, line)) throw CsvError(1, "empty trajectory CSV: " + path);
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader) {
        throw CsvError(row, "bad trajectory CSV header (expected \"" + std::string(kHeader) +
                                "\"): " + path);
    }

    // cell_id -> samples, preserving id order in the output.
    std::map<std::int64_t, std::vector<TrajectorySample>> by_id;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        std::int64_t id = 0;
        std::int64_t frame = 0;
        Vec3 p;
        if (fields.size() != 5 || !parse_i64(fields[0], id) || !parse_i64(fields[1], frame) ||
            !parse_double(fields[2], p.x) || !parse_double(fields[3], p.y) ||
            !parse_double(fields[4], p.z)) {
            throw CsvError(row, "malformed trajectory CSV row " + std::to_string(row) + " in " + path);
        }
        by_id[id].push_back({static_cast<int>(frame), p, 1.0});
    }

    std::vector<Trajectory> tracks;
    tracks.reserve(by_id.size());
    for (auto& [id, samples] : by_id) {
        std::sort(samples.begin(), samples.end(),
                  [](const TrajectorySample& a, const TrajectorySample& b) { return a.frame < b.frame; });
        tracks.push_back({id, std::move(samples)});
    }
    return tracks;
}

}  // namespace celltrack
