#include "smoothcert/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "smoothcert/errors.hpp"

namespace smoothcert {

namespace {

using json = nlohmann::ordered_json;

bool contains_mask_token(const std::string& text) {
  // Checked against raw whitespace-separated words, before lowercasing.
  std::istringstream stream(text);
  std::string word;
  while (stream >> word)
    if (word == kMaskToken) return true;
  return false;
}

}  // namespace

std::vector<LabeledText> Dataset::labeled() const {
  std::vector<LabeledText> out;
  out.reserve(examples.size());
  for (const auto& ex : examples)
    out.push_back(LabeledText{tokenize(ex.text), ex.label});
  return out;
}

std::vector<EvalExample> Dataset::eval_examples() const {
  std::vector<EvalExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples)
    out.push_back(EvalExample{ex.id, tokenize(ex.text), ex.label});
  return out;
}

Dataset load_dataset(const std::filesystem::path& path,
                     int expected_n_classes) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open dataset " + path.string());

  Dataset dataset;
  std::set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  int max_label = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);

    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IngestionError(where + ": bad JSON: " + e.what());
    }

    DatasetExample ex;
    try {
      ex.id = j.at("id").is_string() ? j.at("id").get<std::string>()
                                     : j.at("id").dump();
      ex.text = j.at("text").get<std::string>();
      ex.label = j.at("label").get<int>();
    } catch (const json::exception& e) {
      throw IngestionError(where + ": missing or mistyped field: " + e.what());
    }

    if (!seen_ids.insert(ex.id).second)
      throw IngestionError(where + ": duplicate id \"" + ex.id + "\"");
    if (ex.label < 0)
      throw IngestionError(where + ": negative label " +
                           std::to_string(ex.label));
    if (expected_n_classes > 0 && ex.label >= expected_n_classes)
      throw IngestionError(where + ": label " + std::to_string(ex.label) +
                           " outside 0.." +
                           std::to_string(expected_n_classes - 1));
    if (contains_mask_token(ex.text))
      throw IngestionError(where + ": text contains the reserved token " +
                           std::string(kMaskToken));

    max_label = std::max(max_label, ex.label);
    dataset.examples.push_back(std::move(ex));
  }

  dataset.n_classes =
      expected_n_classes > 0 ? expected_n_classes : std::max(2, max_label + 1);
  for (int c = 0; c < dataset.n_classes; ++c)
    dataset.label_names.push_back("class" + std::to_string(c));
  return dataset;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw PersistenceError("cannot open " + path.string() + " for writing");
  for (const auto& ex : dataset.examples) {
    json j;
    j["id"] = ex.id;
    j["text"] = ex.text;
    j["label"] = ex.label;
    out << j.dump() << "\n";
  }
}

}  // namespace smoothcert
