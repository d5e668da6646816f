#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "smoothcert/attacks.hpp"
#include "smoothcert/backend.hpp"
#include "smoothcert/text.hpp"

namespace smoothcert {

struct DatasetExample {
  std::string id;
  std::string text;
  int label = 0;
};

struct Dataset {
  std::vector<DatasetExample> examples;
  int n_classes = 2;
  std::vector<std::string> label_names;  // optional; defaults to class<i>

  // Tokenized views used by the library operations.
  std::vector<LabeledText> labeled() const;
  std::vector<EvalExample> eval_examples() const;
};

// Parses JSON-lines {"id", "text", "label"} preserving order. Duplicate
// ids, out-of-range labels (when expected_n_classes > 0), and texts
// containing the reserved mask token raise IngestionError naming the line.
// With expected_n_classes == 0 the class count is inferred as
// max(label) + 1 (at least 2).
Dataset load_dataset(const std::filesystem::path& path,
                     int expected_n_classes = 0);

void save_dataset(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace smoothcert
