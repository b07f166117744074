#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "igtrack/geometry.hpp"
#include "igtrack/image.hpp"

namespace igtrack {

struct SequenceRecord {
    std::string id;
    std::vector<Image> frames;
    std::vector<Box> gt;

    std::size_t size() const { return frames.size(); }
    /// Throws PreconditionError unless there are >= 2 frames, one valid
    /// in-bounds box per frame.
    void validate() const;
};

using Dataset = std::vector<SequenceRecord>;

/// Lines `frame_index,x1,y1,w,h` (top-left corner and size), no header.
/// Numbers are written in shortest round-trip form.
void write_boxes_csv(const std::vector<Box>& boxes, const std::filesystem::path& path);
std::vector<Box> read_boxes_csv(const std::filesystem::path& path);

/// One directory per sequence with `%06d.ppm` frames and `groundtruth.csv`.
void write_sequence(const SequenceRecord& seq, const std::filesystem::path& dir);
SequenceRecord read_sequence(const std::filesystem::path& dir);

void write_dataset(const Dataset& dataset, const std::filesystem::path& root);
/// Reads every subdirectory holding a groundtruth.csv, sorted by name.
Dataset read_dataset(const std::filesystem::path& root);

/// First `size - holdout` sequences train, the rest are held out.
struct DatasetSplit {
    Dataset train;
    Dataset held_out;
};
DatasetSplit split_dataset(Dataset dataset, std::size_t holdout);

}  // namespace igtrack
