#include "realism/fusionnet/evaluate.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "realism/error.hpp"
#include "realism/format.hpp"

namespace realism::fusionnet {

Granularity parse_granularity(const std::string& s) {
  if (s == "10") return Granularity::genus10;
  if (s == "5") return Granularity::form5;
  throw InvalidArgument("granularity must be 10 or 5, got '" + s + "'");
}

std::vector<std::string> genus_names() {
  std::vector<std::string> out;
  for (int i = 0; i < kNumGenera; ++i) out.emplace_back(to_string(label_from_index(i)));
  return out;
}

std::vector<std::string> form_abbreviations() {
  std::vector<std::string> out;
  for (int i = 0; i < kNumForms; ++i) out.emplace_back(abbreviation(form_from_index(i)));
  return out;
}

EvalResult evaluate_indices(std::span<const int> truth, std::span<const int> pred, std::vector<std::string> class_names) {
  if (truth.size() != pred.size()) throw ShapeMismatch("truth and prediction counts differ");
  if (truth.empty()) throw DataError("nothing to evaluate");
  const int k = static_cast<int>(class_names.size());
  EvalResult r;
  r.class_names = std::move(class_names);
  r.confusion = Eigen::MatrixXi::Zero(k, k);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= k || pred[i] < 0 || pred[i] >= k) throw InvalidArgument("class index out of range");
    ++r.confusion(truth[i], pred[i]);
  }
  r.n = truth.size();
  r.correct = static_cast<std::size_t>(r.confusion.trace());
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.n);
  int present = 0;
  double psum = 0, rsum = 0;
  for (int c = 0; c < k; ++c) {
    const int support = r.confusion.row(c).sum();
    if (support == 0) continue;
    ++present;
    const int predicted = r.confusion.col(c).sum();
    rsum += static_cast<double>(r.confusion(c, c)) / support;
    psum += predicted ? static_cast<double>(r.confusion(c, c)) / predicted : 0.0;
  }
  r.precision = psum / present;
  r.recall = rsum / present;
  return r;
}

EvalResult evaluate_records(std::span<const CorpusRecord> records, std::span<const int> pred10, Granularity g) {
  if (records.size() != pred10.size()) throw ShapeMismatch("record and prediction counts differ");
  std::vector<int> truth, pred;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    if (pred10[i] < 0 || pred10[i] >= kNumGenera) throw InvalidArgument("predicted genus out of range");
    if (g == Granularity::genus10) {
      if (!rec.label10) throw DataError("record '" + rec.id + "' has no 10-class label");
      truth.push_back(index_of(*rec.label10));
      pred.push_back(pred10[i]);
    } else {
      auto f = rec.form();
      if (!f) throw DataError("record '" + rec.id + "' is unlabeled");
      truth.push_back(index_of(*f));
      pred.push_back(index_of(map_to_form(label_from_index(pred10[i]))));
    }
  }
  return evaluate_indices(truth, pred, g == Granularity::genus10 ? genus_names() : form_abbreviations());
}

int argmax_row(const Tensor<double>& probs, Index row) {
  const Index k = probs.shape.per_sample();
  int best = 0;
  for (Index j = 1; j < k; ++j)
    if (probs.data[row * k + j] > probs.data[row * k + best]) best = static_cast<int>(j);
  return best;
}

std::vector<PredictionRow> prediction_rows(std::span<const std::string> ids, const Tensor<double>& probs) {
  if (probs.shape.per_sample() != kNumGenera) throw ShapeMismatch("prediction rows need 10-class posteriors");
  if (static_cast<Index>(ids.size()) != probs.shape.n) throw ShapeMismatch("id count differs from posterior rows");
  std::vector<PredictionRow> rows;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    PredictionRow r;
    r.id = ids[i];
    r.pred10 = argmax_row(probs, static_cast<Index>(i));
    for (int j = 0; j < kNumGenera; ++j) r.posterior[j] = probs.data[static_cast<Index>(i) * kNumGenera + j];
    r.max_posterior = r.posterior[r.pred10];
    rows.push_back(r);
  }
  return rows;
}

void write_predictions_csv(const std::filesystem::path& path, std::span<const PredictionRow> rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "id,pred10,pred5,max_posterior";
  for (const auto& g : genus_names()) os << ",p_" << g;
  os << "\n";
  for (const auto& r : rows) {
    os << r.id << ',' << to_string(label_from_index(r.pred10)) << ',' << to_string(r.pred5()) << ','
       << fmt_fixed(r.max_posterior, 8);
    for (double p : r.posterior) os << ',' << fmt_fixed(p, 8);
    os << "\n";
  }
}

std::vector<PredictionRow> read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line)) throw ParseError("empty predictions file " + path.string());
  std::vector<PredictionRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != 4 + kNumGenera)
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(4 + kNumGenera) +
                       " columns");
    PredictionRow r;
    r.id = cells[0];
    r.pred10 = index_of(parse_label(cells[1]));
    if (parse_form(cells[2]) != r.pred5())
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": pred5 inconsistent with pred10");
    r.max_posterior = parse_double(cells[3]);
    for (int j = 0; j < kNumGenera; ++j) r.posterior[j] = parse_double(cells[4 + j]);
    rows.push_back(r);
  }
  return rows;
}

std::string confusion_csv(const EvalResult& r) {
  std::ostringstream os;
  os << "truth\\pred";
  for (const auto& n : r.class_names) os << ',' << n;
  os << "\n";
  for (Index i = 0; i < r.confusion.rows(); ++i) {
    os << r.class_names[i];
    for (Index j = 0; j < r.confusion.cols(); ++j) os << ',' << r.confusion(i, j);
    os << "\n";
  }
  return os.str();
}

}  // namespace realism::fusionnet
