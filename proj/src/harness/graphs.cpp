#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "vaetpp/errors.hpp"
#include "vaetpp/harness.hpp"
#include "vaetpp/model/vaetpp.hpp"

namespace vaetpp {

namespace fs = std::filesystem;
using nn::Matrix;

std::vector<EdgeProbability> edge_posteriors(const model::EventModel& m, const std::vector<const EventSequence*>& seqs,
                                             int num_intervals) {
    const auto* vae = dynamic_cast<const model::VaeTpp*>(&m);
    if (vae == nullptr) {
        throw ValidationError("model '" + m.name() + "' has no latent graph to export");
    }
    const int K = vae->num_intervals();
    if (K != 1 && K != num_intervals) {
        throw ValidationError("model has " + std::to_string(K) + " intervals, asked for " +
                              std::to_string(num_intervals));
    }
    std::vector<EdgeProbability> out;
    for (const auto* s : seqs) {
        const Matrix probs = vae->edge_probabilities(*s);
        for (int k = 0; k < num_intervals; ++k) {
            for (int p = 0; p < vae->num_pairs(); ++p) {
                const auto [v, u] = vae->pairs()[p];
                out.push_back({s->id(), k, v, u, probs(K == 1 ? 0 : k, p)});
            }
        }
    }
    return out;
}

namespace {

std::string svg_heatmap(const Eigen::MatrixXd& p, int k) {
    const int U = static_cast<int>(p.rows());
    const int cell = 48, margin = 60;
    const int size = margin + U * cell + 20;
    std::ostringstream s;
    s << std::fixed << std::setprecision(2);
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size + 20 << "\">\n";
    s << "<text x=\"" << margin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">interval " << k
      << ": P(edge u -> v)</text>\n";
    for (int i = 0; i < U; ++i) {
        s << "<text x=\"" << margin + i * cell + cell / 2 << "\" y=\"" << margin - 8
          << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">u=" << i << "</text>\n";
        s << "<text x=\"" << margin - 8 << "\" y=\"" << margin + i * cell + cell / 2 + 4
          << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">v=" << i << "</text>\n";
    }
    for (int v = 0; v < U; ++v) {
        for (int u = 0; u < U; ++u) {
            const int x = margin + u * cell, y = margin + v * cell;
            if (u == v) {
                s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
                  << "\" fill=\"#dddddd\" stroke=\"#ffffff\"/>\n";
                continue;
            }
            const int shade = static_cast<int>(std::lround(255.0 * (1.0 - p(v, u))));
            s << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell
              << "\" fill=\"rgb(" << shade << "," << shade << ",255)\" stroke=\"#ffffff\"/>\n";
            s << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
              << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\" fill=\""
              << (p(v, u) > 0.6 ? "#ffffff" : "#000000") << "\">" << p(v, u) << "</text>\n";
        }
    }
    s << "</svg>\n";
    return s.str();
}

} // namespace

void export_graphs(const std::vector<EdgeProbability>& edges, int num_types, int num_intervals,
                   const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw RuntimeFailure("cannot create output directory '" + dir + "': " + ec.message());
    }
    std::ofstream table(fs::path(dir) / "edges.csv");
    table << "seq_id,k,v,u,p\n" << std::setprecision(10);
    std::vector<Eigen::MatrixXd> sums(num_intervals, Eigen::MatrixXd::Zero(num_types, num_types));
    std::vector<Eigen::MatrixXd> counts = sums;
    for (const auto& e : edges) {
        table << e.seq_id << ',' << e.k << ',' << e.v << ',' << e.u << ',' << e.p << '\n';
        sums.at(e.k)(e.v, e.u) += e.p;
        counts.at(e.k)(e.v, e.u) += 1.0;
    }
    if (!table) {
        throw RuntimeFailure("failed writing edges.csv in '" + dir + "'");
    }
    std::ofstream agg(fs::path(dir) / "aggregate.csv");
    agg << "k,v,u,p\n" << std::setprecision(10);
    for (int k = 0; k < num_intervals; ++k) {
        const Eigen::MatrixXd mean = sums[k].cwiseQuotient(counts[k].cwiseMax(1.0));
        for (int v = 0; v < num_types; ++v) {
            for (int u = 0; u < num_types; ++u) {
                if (u != v) {
                    agg << k << ',' << v << ',' << u << ',' << mean(v, u) << '\n';
                }
            }
        }
        std::ofstream svg(fs::path(dir) / ("interval_" + std::to_string(k) + ".svg"));
        svg << svg_heatmap(mean, k);
    }
}

double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw ValidationError("scores and labels differ in length");
    }
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // average ranks over ties, then Mann-Whitney U
    std::vector<double> rank(scores.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) {
            ++j;
        }
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) {
            rank[idx[t]] = r;
        }
        i = j + 1;
    }
    double pos = 0.0, neg = 0.0, rank_sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i]) {
            pos += 1.0;
            rank_sum += rank[i];
        } else {
            neg += 1.0;
        }
    }
    if (pos == 0.0 || neg == 0.0) {
        throw ValidationError("AUROC needs both positive and negative labels");
    }
    return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

PairedSummary paired_difference(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw ValidationError("paired difference needs two equal-length samples of size >= 2");
    }
    const auto n = static_cast<double>(a.size());
    std::vector<double> d(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        d[i] = a[i] - b[i];
    }
    const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : d) {
        ss += (x - mean) * (x - mean);
    }
    return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

} // namespace vaetpp
