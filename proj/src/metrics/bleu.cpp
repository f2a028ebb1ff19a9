#include <cctype>
#include <cmath>
#include <map>

#include "lrml/ir/codec.hpp"
#include "lrml/metrics.hpp"

namespace lrml::metrics {

LengthMismatch::LengthMismatch(std::size_t predictions, std::size_t references)
    : std::invalid_argument(std::to_string(predictions) + " predictions for " +
                            std::to_string(references) + " references") {}

std::vector<std::string> bleu_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else if (c == '(' || c == ')' || c == ',') {
      flush();
      out.emplace_back(1, c);
    } else {
      cur.push_back(c);
    }
  }
  flush();
  return out;
}

std::string bleu_surface(std::string_view ir_text) {
  try {
    return ir::serialize_ir(ir::parse_ir(ir_text), ir::Style::spaced);
  } catch (const ir::ParseError&) {
    return std::string(ir_text);
  }
}

namespace {

using Ngram = std::vector<std::string_view>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
  std::map<Ngram, std::size_t> counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++counts[Ngram(toks.begin() + static_cast<std::ptrdiff_t>(i),
                   toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

double corpus_bleu(std::span<const std::string> predictions, std::span<const std::string> references,
                   int max_n) {
  if (predictions.size() != references.size()) {
    throw LengthMismatch(predictions.size(), references.size());
  }
  if (max_n < 1) throw std::invalid_argument("max_n must be at least 1");

  std::vector<std::size_t> matched(static_cast<std::size_t>(max_n), 0);
  std::vector<std::size_t> total(static_cast<std::size_t>(max_n), 0);
  std::size_t pred_len = 0;
  std::size_t ref_len = 0;

  for (std::size_t s = 0; s < predictions.size(); ++s) {
    std::vector<std::string> p = bleu_tokens(predictions[s]);
    std::vector<std::string> r = bleu_tokens(references[s]);
    pred_len += p.size();
    ref_len += r.size();
    for (std::size_t n = 1; n <= static_cast<std::size_t>(max_n); ++n) {
      auto pc = ngram_counts(p, n);
      auto rc = ngram_counts(r, n);
      for (const auto& [gram, count] : pc) {
        auto it = rc.find(gram);
        if (it != rc.end()) matched[n - 1] += std::min(count, it->second);
        total[n - 1] += count;
      }
    }
  }

  if (pred_len == 0) return ref_len == 0 ? 1.0 : 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 0; n < matched.size(); ++n) {
    if (matched[n] == 0 || total[n] == 0) return 0.0;
    log_sum += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
  }
  double bp = pred_len > ref_len
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(pred_len));
  return bp * std::exp(log_sum / static_cast<double>(max_n));
}

}  // namespace lrml::metrics
