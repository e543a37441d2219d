#include "debiasmix/evaluation.hpp"

#include <cmath>
#include <limits>

#include "debiasmix/errors.hpp"
#include "debiasmix/training.hpp"

namespace debiasmix {

bool GroupAccuracies::operator==(const GroupAccuracies& o) const {
  auto same_cells = [](const std::optional<ag::Matrix>& a, const std::optional<ag::Matrix>& b) {
    if (a.has_value() != b.has_value()) return false;
    if (!a) return true;
    if (a->rows() != b->rows() || a->cols() != b->cols()) return false;
    for (ag::Index i = 0; i < a->size(); ++i) {
      const double x = a->data()[i], y = b->data()[i];
      if (!(x == y || (std::isnan(x) && std::isnan(y)))) return false;
    }
    return true;
  };
  const bool same_counts = counts.has_value() == o.counts.has_value() && (!counts || *counts == *o.counts);
  return acc_all == o.acc_all && acc_unbiased == o.acc_unbiased && acc_biased == o.acc_biased &&
         same_cells(per_cell, o.per_cell) && same_counts;
}

nlohmann::json to_json(const GroupAccuracies& g) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j{{"acc_all", g.acc_all}, {"acc_unbiased", opt(g.acc_unbiased)}, {"acc_biased", opt(g.acc_biased)}};
  if (g.per_cell && g.counts) {
    nlohmann::json cells = nlohmann::json::array();
    nlohmann::json counts = nlohmann::json::array();
    for (ag::Index r = 0; r < g.per_cell->rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      nlohmann::json crow = nlohmann::json::array();
      for (ag::Index c = 0; c < g.per_cell->cols(); ++c) {
        const double v = (*g.per_cell)(r, c);
        row.push_back(std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v));
        crow.push_back((*g.counts)(r, c));
      }
      cells.push_back(row);
      counts.push_back(crow);
    }
    j["per_cell"] = cells;
    j["counts"] = counts;
  } else {
    j["per_cell"] = nullptr;
    j["counts"] = nullptr;
  }
  return j;
}

GroupAccuracies group_accuracies_from_json(const nlohmann::json& j) {
  try {
    GroupAccuracies g;
    g.acc_all = j.at("acc_all").get<double>();
    if (!j.at("acc_unbiased").is_null()) g.acc_unbiased = j.at("acc_unbiased").get<double>();
    if (!j.at("acc_biased").is_null()) g.acc_biased = j.at("acc_biased").get<double>();
    if (!j.at("per_cell").is_null()) {
      const auto& cells = j.at("per_cell");
      const auto& counts = j.at("counts");
      const auto rows = static_cast<ag::Index>(cells.size());
      const auto cols = rows == 0 ? 0 : static_cast<ag::Index>(cells[0].size());
      ag::Matrix m(rows, cols);
      Eigen::MatrixXi n(rows, cols);
      for (ag::Index r = 0; r < rows; ++r) {
        for (ag::Index c = 0; c < cols; ++c) {
          const auto& v = cells[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
          m(r, c) = v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
          n(r, c) = counts[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<int>();
        }
      }
      g.per_cell = m;
      g.counts = n;
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("group accuracies: ") + e.what());
  }
}

GroupAccuracies score_predictions(const DatasetBundle& bundle, std::span<const Sample> samples,
                                  const std::vector<int>& predictions) {
  if (predictions.size() != samples.size()) throw PreconditionError("evaluate: prediction count mismatch");
  if (samples.empty()) throw PreconditionError("evaluate: empty sample set");
  GroupAccuracies g;
  std::size_t hits = 0;
  bool have_domains = bundle.num_domains > 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    hits += predictions[i] == samples[i].class_label;
    have_domains = have_domains && samples[i].bias_domain.has_value();
  }
  g.acc_all = static_cast<double>(hits) / static_cast<double>(samples.size());
  if (!have_domains) return g;

  Eigen::MatrixXi correct = Eigen::MatrixXi::Zero(bundle.num_classes, bundle.num_domains);
  Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(bundle.num_classes, bundle.num_domains);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    counts(s.class_label, *s.bias_domain) += 1;
    correct(s.class_label, *s.bias_domain) += predictions[i] == s.class_label;
  }
  long unb_hits = 0, unb_n = 0, b_hits = 0, b_n = 0;
  ag::Matrix cells(bundle.num_classes, bundle.num_domains);
  for (int c = 0; c < bundle.num_classes; ++c) {
    for (int d = 0; d < bundle.num_domains; ++d) {
      cells(c, d) = counts(c, d) == 0 ? std::numeric_limits<double>::quiet_NaN()
                                      : static_cast<double>(correct(c, d)) / counts(c, d);
      const bool aligned = d == bundle.privileged_domains.at(static_cast<std::size_t>(c));
      (aligned ? b_hits : unb_hits) += correct(c, d);
      (aligned ? b_n : unb_n) += counts(c, d);
    }
  }
  if (unb_n > 0) g.acc_unbiased = static_cast<double>(unb_hits) / static_cast<double>(unb_n);
  if (b_n > 0) g.acc_biased = static_cast<double>(b_hits) / static_cast<double>(b_n);
  g.per_cell = cells;
  g.counts = counts;
  return g;
}

GroupAccuracies evaluate(const ModelTriplet& model, const DatasetBundle& bundle) {
  return score_predictions(bundle, bundle.test, predict(model, all_features(bundle.test)));
}

}  // namespace debiasmix
