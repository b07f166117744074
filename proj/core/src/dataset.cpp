#include "igtrack/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "igtrack/errors.hpp"

namespace fs = std::filesystem;

namespace igtrack {

void SequenceRecord::validate() const {
    if (frames.size() < 2) throw PreconditionError("sequence '" + id + "' needs at least 2 frames");
    if (gt.size() != frames.size()) throw PreconditionError("sequence '" + id + "': one box per frame required");
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const Box& b = gt[i];
        const Image& f = frames[i];
        if (!b.valid() || b.x1() < 0 || b.y1() < 0 || b.x2() > f.width || b.y2() > f.height) {
            throw PreconditionError("sequence '" + id + "': box " + std::to_string(i) + " invalid or out of frame");
        }
    }
}

namespace {

std::string shortest(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

double parse_double(std::string_view text, const fs::path& path, std::size_t line) {
    double v = 0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
        throw IoError(path.string() + ":" + std::to_string(line) + ": bad number '" + std::string(text) + "'");
    }
    return v;
}

std::string frame_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06zu.ppm", i);
    return buf;
}

}  // namespace

void write_boxes_csv(const std::vector<Box>& boxes, const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const Box& b = boxes[i];
        out << i << ',' << shortest(b.x1()) << ',' << shortest(b.y1()) << ',' << shortest(b.w) << ','
            << shortest(b.h) << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<Box> read_boxes_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<Box> boxes;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view rest(line);
        for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
            fields.push_back(rest.substr(0, pos));
        }
        fields.push_back(rest);
        if (fields.size() != 5) throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 5 fields");
        const double index = parse_double(fields[0], path, lineno);
        if (index != static_cast<double>(boxes.size())) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": frame indices must be consecutive from 0");
        }
        boxes.push_back(Box::from_xywh(parse_double(fields[1], path, lineno), parse_double(fields[2], path, lineno),
                                       parse_double(fields[3], path, lineno), parse_double(fields[4], path, lineno)));
    }
    return boxes;
}

void write_sequence(const SequenceRecord& seq, const fs::path& dir) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < seq.frames.size(); ++i) write_ppm(seq.frames[i], dir / frame_name(i));
    write_boxes_csv(seq.gt, dir / "groundtruth.csv");
}

SequenceRecord read_sequence(const fs::path& dir) {
    SequenceRecord seq;
    seq.id = dir.filename().string();
    if (seq.id.empty()) seq.id = dir.parent_path().filename().string();
    seq.gt = read_boxes_csv(dir / "groundtruth.csv");
    for (std::size_t i = 0; i < seq.gt.size(); ++i) seq.frames.push_back(read_ppm(dir / frame_name(i)));
    seq.validate();
    return seq;
}

void write_dataset(const Dataset& dataset, const fs::path& root) {
    fs::create_directories(root);
    for (const SequenceRecord& seq : dataset) write_sequence(seq, root / seq.id);
}

Dataset read_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) throw IoError("dataset directory not found: " + root.string());
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "groundtruth.csv")) dirs.push_back(entry.path());
    }
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw IoError("no sequences (groundtruth.csv) under " + root.string());
    Dataset out;
    for (const fs::path& d : dirs) out.push_back(read_sequence(d));
    return out;
}

DatasetSplit split_dataset(Dataset dataset, std::size_t holdout) {
    if (holdout >= dataset.size()) {
        throw ConfigError("hold-out count " + std::to_string(holdout) + " leaves no training sequences out of " +
                          std::to_string(dataset.size()));
    }
    DatasetSplit split;
    const auto cut = dataset.end() - static_cast<std::ptrdiff_t>(holdout);
    split.train.assign(std::make_move_iterator(dataset.begin()), std::make_move_iterator(cut));
    split.held_out.assign(std::make_move_iterator(cut), std::make_move_iterator(dataset.end()));
    return split;
}

}  // namespace igtrack
