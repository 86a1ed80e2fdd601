#pragma once

#include <string>

#include "ptlab/dataset.hpp"
#include "ptlab/poison.hpp"

namespace ptlab {

// Persists a dataset as <prefix>.json (index: ids, labels, poisoned flags,
// optional source paths and poison plan) plus <prefix>.pix (raw float32
// little-endian pixels, examples in index order). Output bytes depend only
// on the dataset contents.
void save_dataset(const PoisonedDataset& dataset, const std::string& prefix);

PoisonedDataset load_dataset(const std::string& prefix);

// GRAY/RGB netpbm images: P2/P5 (grayscale) and P3/P6 (RGB), any maxval up
// to 65535, values normalized to [0,1].
Image load_pnm(const std::string& path);

// One subdirectory per class, sorted lexicographically to assign labels
// 0..K-1; files inside each class likewise sorted; ids assigned in
// (class, filename) order. Only .pgm/.ppm/.pnm files are considered.
Dataset load_image_folder(const std::string& root);

}  // namespace ptlab
