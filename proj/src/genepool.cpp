#include "biobo/genepool.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string_view>

namespace biobo {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

double parse_finite(std::string_view cell, const std::string& source, std::size_t line, std::size_t column) {
    cell = trim(cell);
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (!cell.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (cell.empty() || ec != std::errc{} || ptr != last) {
        throw ParseError(source, line, column, "cannot parse '" + std::string(cell) + "' as a number");
    }
    if (!std::isfinite(value)) {
        throw ParseError(source, line, column, "non-finite value '" + std::string(cell) + "'");
    }
    return value;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), "cannot open file");
    return in;
}

// Header must start with `gene_id`; returns the number of columns.
std::size_t read_header(std::istream& in, const std::string& source, std::size_t& line_no) {
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(trim(line), ',');
        if (trim(fields.front()) != "gene_id") {
            throw ParseError(source, line_no, 1, "header must start with 'gene_id'");
        }
        return fields.size();
    }
    throw ParseError(source, "empty file (missing header)");
}

void write_double(std::ostream& out, double v) {
    out << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
}

}  // namespace

// ---------------------------------------------------------------------------
// GenePool

GenePool::GenePool(std::vector<GeneId> ids, std::map<std::string, Eigen::MatrixXd> modalities,
                   Eigen::VectorXd labels) {
    const auto n = ids.size();
    if (static_cast<std::size_t>(labels.size()) != n) {
        throw DataError("label vector length does not match the number of ids");
    }
    for (const auto& [name, m] : modalities) {
        if (static_cast<std::size_t>(m.rows()) != n) {
            throw DataError("modality '" + name + "' has " + std::to_string(m.rows()) + " rows, expected " +
                            std::to_string(n));
        }
        if (!m.allFinite()) throw DataError("modality '" + name + "' contains non-finite entries");
    }
    if (!labels.allFinite()) throw DataError("labels contain non-finite values");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    for (std::size_t i = 1; i < n; ++i) {
        if (ids[order[i]] == ids[order[i - 1]]) throw DataError("duplicate gene id '" + ids[order[i]] + "'");
    }

    ids_.reserve(n);
    labels_.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        ids_.push_back(std::move(ids[order[i]]));
        labels_(static_cast<Eigen::Index>(i)) = labels(static_cast<Eigen::Index>(order[i]));
        index_.emplace(ids_.back(), i);
    }
    for (auto& [name, m] : modalities) {
        Eigen::MatrixXd sorted(m.rows(), m.cols());
        for (std::size_t i = 0; i < n; ++i) {
            sorted.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(order[i]));
        }
        modalities_.emplace(name, std::move(sorted));
    }
}

std::optional<std::size_t> GenePool::index_of(const GeneId& id) const {
    const auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::string> GenePool::modality_names() const {
    std::vector<std::string> names;
    for (const auto& kv : modalities_) names.push_back(kv.first);
    return names;
}

const Eigen::MatrixXd& GenePool::modality(const std::string& name) const {
    const auto it = modalities_.find(name);
    if (it == modalities_.end()) throw std::invalid_argument("unknown modality '" + name + "'");
    return it->second;
}

EmbeddingTable GenePool::modality_table(const std::string& name) const {
    return EmbeddingTable{name, ids_, modality(name)};
}

double GenePool::label(const GeneId& id) const {
    const auto idx = index_of(id);
    if (!idx) throw std::invalid_argument("gene '" + id + "' is not in the pool");
    return labels_(static_cast<Eigen::Index>(*idx));
}

LabelTable GenePool::label_table() const {
    return LabelTable{ids_, std::vector<double>(labels_.data(), labels_.data() + labels_.size())};
}

Eigen::MatrixXd GenePool::rows(const Eigen::MatrixXd& features, const std::vector<GeneId>& ids) const {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(ids.size()), features.cols());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto idx = index_of(ids[i]);
        if (!idx) throw std::invalid_argument("gene '" + ids[i] + "' is not in the pool");
        out.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(*idx));
    }
    return out;
}

// ---------------------------------------------------------------------------
// PathwayDB

void PathwayDB::add(const std::string& name, GeneSet genes) {
    if (genes.empty()) throw DataError("pathway '" + name + "' has no genes");
    if (!pathways_.emplace(name, std::move(genes)).second) {
        throw DataError("duplicate pathway name '" + name + "'");
    }
}

const PathwayDB::GeneSet& PathwayDB::genes(const std::string& name) const {
    const auto it = pathways_.find(name);
    if (it == pathways_.end()) throw std::invalid_argument("unknown pathway '" + name + "'");
    return it->second;
}

bool PathwayDB::contains(const std::string& pathway, const GeneId& gene) const {
    const auto it = pathways_.find(pathway);
    return it != pathways_.end() && it->second.count(gene) != 0;
}

PathwayDB PathwayDB::restricted_to(const std::set<GeneId>& universe) const {
    PathwayDB out;
    for (const auto& [name, genes] : pathways_) {
        GeneSet kept;
        std::set_intersection(genes.begin(), genes.end(), universe.begin(), universe.end(),
                              std::inserter(kept, kept.end()));
        if (!kept.empty()) out.pathways_.emplace(name, std::move(kept));
    }
    out.universe_hint = universe.size();
    return out;
}

// ---------------------------------------------------------------------------
// PoolState

PoolState::PoolState(const GenePool& pool) : unlabeled_(pool.ids().begin(), pool.ids().end()) {}

void PoolState::label(const GeneId& id, double value) {
    if (unlabeled_.erase(id) == 0) {
        throw std::invalid_argument("gene '" + id + "' is not unlabeled");
    }
    labeled_.emplace(id, value);
    order_.push_back(id);
}

// ---------------------------------------------------------------------------
// I/O

EmbeddingTable read_embeddings(std::istream& in, const std::string& modality_name, const std::string& source) {
    std::size_t line_no = 0;
    const auto columns = read_header(in, source, line_no);
    if (columns < 2) throw ParseError(source, line_no, 1, "header has no feature columns");
    const auto d = columns - 1;

    EmbeddingTable table;
    table.modality = modality_name;
    std::vector<double> flat;
    std::set<GeneId> seen;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        const auto content = trim(line);
        if (content.empty()) continue;
        const auto fields = split(content, ',');
        if (fields.size() != columns) {
            throw ParseError(source, line_no, 1,
                             "ragged row: expected " + std::to_string(columns) + " fields, got " +
                                 std::to_string(fields.size()));
        }
        GeneId id{trim(fields[0])};
        if (id.empty()) throw ParseError(source, line_no, 1, "empty gene id");
        if (!seen.insert(id).second) throw ParseError(source, line_no, 1, "duplicate gene id '" + id + "'");
        for (std::size_t j = 1; j < columns; ++j) flat.push_back(parse_finite(fields[j], source, line_no, j + 1));
        table.ids.push_back(std::move(id));
    }
    const auto n = static_cast<Eigen::Index>(table.ids.size());
    table.values = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        flat.data(), n, static_cast<Eigen::Index>(d));
    return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const std::string& modality_name) {
    auto in = open_or_throw(path);
    return read_embeddings(in, modality_name, path.string());
}

LabelTable read_labels(std::istream& in, const std::string& source) {
    std::size_t line_no = 0;
    const auto columns = read_header(in, source, line_no);
    if (columns != 2) throw ParseError(source, line_no, 1, "label header must be 'gene_id,value'");
    LabelTable table;
    std::set<GeneId> seen;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        const auto content = trim(line);
        if (content.empty()) continue;
        const auto fields = split(content, ',');
        if (fields.size() != 2) {
            throw ParseError(source, line_no, 1, "ragged row: expected 2 fields, got " + std::to_string(fields.size()));
        }
        GeneId id{trim(fields[0])};
        if (id.empty()) throw ParseError(source, line_no, 1, "empty gene id");
        if (!seen.insert(id).second) throw ParseError(source, line_no, 1, "duplicate gene id '" + id + "'");
        table.values.push_back(parse_finite(fields[1], source, line_no, 2));
        table.ids.push_back(std::move(id));
    }
    return table;
}

LabelTable load_labels(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return read_labels(in, path.string());
}

PathwayDB read_gmt(std::istream& in, const std::string& source) {
    PathwayDB db;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto fields = split(line, '\t');
        if (fields.size() < 3) {
            throw ParseError(source, line_no, 1, "GMT line needs a name, a description and at least one gene");
        }
        const std::string name{trim(fields[0])};
        if (name.empty()) throw ParseError(source, line_no, 1, "empty pathway name");
        PathwayDB::GeneSet genes;
        for (std::size_t j = 2; j < fields.size(); ++j) {
            const auto g = trim(fields[j]);
            if (!g.empty()) genes.emplace(g);
        }
        if (genes.empty()) throw ParseError(source, line_no, 3, "pathway '" + name + "' lists no genes");
        if (db.pathways().count(name) != 0) {
            throw ParseError(source, line_no, 1, "duplicate pathway name '" + name + "'");
        }
        db.add(name, std::move(genes));
    }
    return db;
}

PathwayDB parse_gmt(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    return read_gmt(in, path.string());
}

void write_embeddings(std::ostream& out, const EmbeddingTable& table) {
    out << "gene_id";
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) out << ",f" << j;
    out << '\n';
    for (std::size_t i = 0; i < table.ids.size(); ++i) {
        out << table.ids[i];
        for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
            out << ',';
            write_double(out, table.values(static_cast<Eigen::Index>(i), j));
        }
        out << '\n';
    }
}

void write_labels(std::ostream& out, const LabelTable& table) {
    out << "gene_id,value\n";
    for (std::size_t i = 0; i < table.ids.size(); ++i) {
        out << table.ids[i] << ',';
        write_double(out, table.values[i]);
        out << '\n';
    }
}

void write_gmt(std::ostream& out, const PathwayDB& db) {
    for (const auto& [name, genes] : db.pathways()) {
        out << name << '\t' << name;
        for (const auto& g : genes) out << '\t' << g;
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Pool construction

std::pair<GenePool, PathwayDB> build_pool(const std::vector<EmbeddingTable>& modalities, const LabelTable& labels,
                                          const PathwayDB& pathways) {
    if (modalities.empty()) throw std::invalid_argument("build_pool needs at least one modality");
    if (labels.ids.empty()) throw std::invalid_argument("build_pool needs a non-empty label table");
    if (labels.ids.size() != labels.values.size()) throw DataError("label table ids/values length mismatch");

    std::set<GeneId> common(labels.ids.begin(), labels.ids.end());
    std::set<std::string> names;
    for (const auto& table : modalities) {
        if (!names.insert(table.modality).second) {
            throw DataError("modality '" + table.modality + "' given twice");
        }
        if (static_cast<std::size_t>(table.values.rows()) != table.ids.size()) {
            throw DataError("modality '" + table.modality + "' ids/rows length mismatch");
        }
        std::set<GeneId> ids(table.ids.begin(), table.ids.end());
        if (ids.size() != table.ids.size()) throw DataError("modality '" + table.modality + "' has duplicate ids");
        std::set<GeneId> kept;
        std::set_intersection(common.begin(), common.end(), ids.begin(), ids.end(), std::inserter(kept, kept.end()));
        common = std::move(kept);
    }
    if (common.empty()) throw DataError("no gene is present in every modality and in the labels");

    const std::vector<GeneId> ids(common.begin(), common.end());
    const auto n = static_cast<Eigen::Index>(ids.size());

    auto positions = [](const std::vector<GeneId>& table_ids) {
        std::unordered_map<GeneId, std::size_t> pos;
        pos.reserve(table_ids.size());
        for (std::size_t i = 0; i < table_ids.size(); ++i) pos.emplace(table_ids[i], i);
        return pos;
    };

    std::map<std::string, Eigen::MatrixXd> matrices;
    for (const auto& table : modalities) {
        const auto pos = positions(table.ids);
        Eigen::MatrixXd m(n, table.values.cols());
        for (Eigen::Index i = 0; i < n; ++i) {
            m.row(i) = table.values.row(static_cast<Eigen::Index>(pos.at(ids[static_cast<std::size_t>(i)])));
        }
        matrices.emplace(table.modality, std::move(m));
    }
    const auto label_pos = positions(labels.ids);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) y(i) = labels.values[label_pos.at(ids[static_cast<std::size_t>(i)])];

    GenePool pool(ids, std::move(matrices), std::move(y));
    PathwayDB restricted = pathways.restricted_to(common);
    return {std::move(pool), std::move(restricted)};
}

Eigen::MatrixXd fuse(const GenePool& pool, const std::vector<std::string>& modality_names) {
    if (modality_names.empty()) throw std::invalid_argument("fuse needs at least one modality");
    Eigen::Index width = 0;
    for (const auto& name : modality_names) width += pool.modality(name).cols();

    Eigen::MatrixXd fused(static_cast<Eigen::Index>(pool.size()), width);
    Eigen::Index offset = 0;
    for (const auto& name : modality_names) {
        const auto& m = pool.modality(name);
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const double norm = m.row(i).norm();
            if (norm > 0.0) {
                fused.block(i, offset, 1, m.cols()) = m.row(i) / norm;
            } else {
                fused.block(i, offset, 1, m.cols()).setZero();
            }
        }
        offset += m.cols();
    }
    return fused;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

std::pair<GenePool, PathwayDB> synth_benchmark(const SynthParams& p, std::vector<std::string>* signal_pathway_names) {
    if (p.n_genes < 50) throw std::invalid_argument("synth_benchmark: n_genes must be >= 50");
    if (p.d < 1) throw std::invalid_argument("synth_benchmark: d must be >= 1");
    if (p.n_pathways < 1 || p.n_pathways > p.n_genes) {
        throw std::invalid_argument("synth_benchmark: n_pathways must be in [1, n_genes]");
    }
    if (p.signal_pathways < 1 || p.signal_pathways > p.n_pathways) {
        throw std::invalid_argument("synth_benchmark: signal_pathways must be in [1, n_pathways]");
    }
    if (!(p.noise_sd >= 0.0) || !std::isfinite(p.noise_sd)) {
        throw std::invalid_argument("synth_benchmark: noise_sd must be finite and >= 0");
    }

    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    const auto width = std::to_string(p.n_genes - 1).size();
    const auto pw_width = std::to_string(p.n_pathways - 1).size();
    auto gene_name = [&](std::size_t i) {
        std::ostringstream s;
        s << 'G' << std::setw(static_cast<int>(width)) << std::setfill('0') << i;
        return s.str();
    };
    auto pathway_name = [&](std::size_t m) {
        std::ostringstream s;
        s << "PATHWAY_" << std::setw(static_cast<int>(pw_width)) << std::setfill('0') << m;
        return s.str();
    };

    // Cluster sizes differ by at most one when n_pathways does not divide n_genes.
    std::vector<std::size_t> cluster(p.n_genes);
    for (std::size_t i = 0; i < p.n_genes; ++i) cluster[i] = i % p.n_pathways;
    std::shuffle(cluster.begin(), cluster.end(), rng);

    std::vector<std::size_t> cluster_order(p.n_pathways);
    std::iota(cluster_order.begin(), cluster_order.end(), std::size_t{0});
    std::shuffle(cluster_order.begin(), cluster_order.end(), rng);
    std::vector<bool> is_signal(p.n_pathways, false);
    for (std::size_t s = 0; s < p.signal_pathways; ++s) is_signal[cluster_order[s]] = true;

    const auto d = static_cast<Eigen::Index>(p.d);
    Eigen::MatrixXd centers(static_cast<Eigen::Index>(p.n_pathways), d);
    for (Eigen::Index m = 0; m < centers.rows(); ++m)
        for (Eigen::Index j = 0; j < d; ++j) centers(m, j) = normal(rng);

    std::vector<GeneId> ids(p.n_genes);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(p.n_genes), d);
    Eigen::VectorXd y(static_cast<Eigen::Index>(p.n_genes));
    std::vector<PathwayDB::GeneSet> members(p.n_pathways);
    for (std::size_t i = 0; i < p.n_genes; ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const auto m = cluster[i];
        ids[i] = gene_name(i);
        for (Eigen::Index j = 0; j < d; ++j) {
            x(row, j) = centers(static_cast<Eigen::Index>(m), j) + synth_cluster_jitter_sd * normal(rng);
        }
        y(row) = p.noise_sd * normal(rng) + (is_signal[m] ? synth_signal_bonus : 0.0);
        members[m].insert(ids[i]);
    }

    PathwayDB db;
    for (std::size_t m = 0; m < p.n_pathways; ++m) db.add(pathway_name(m), std::move(members[m]));
    db.universe_hint = p.n_genes;
    if (signal_pathway_names != nullptr) {
        signal_pathway_names->clear();
        for (std::size_t m = 0; m < p.n_pathways; ++m)
            if (is_signal[m]) signal_pathway_names->push_back(pathway_name(m));
    }

    std::map<std::string, Eigen::MatrixXd> modalities;
    modalities.emplace("synthetic", std::move(x));
    return {GenePool(std::move(ids), std::move(modalities), std::move(y)), std::move(db)};
}

// ---------------------------------------------------------------------------
// Splits and rankings

std::vector<GeneId> top_genes_by_label(const GenePool& pool, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("fraction must be in (0, 1]");
    const std::vector<double> values(pool.labels().data(), pool.labels().data() + pool.labels().size());
    const auto idx = top_k_indices(values, pool.ids(), ceil_count(fraction, pool.size()));
    std::vector<GeneId> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(pool.id(i));
    return out;
}

Split train_test_split(const GenePool& pool, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw std::invalid_argument("test_fraction must be in (0, 1)");
    const auto n = pool.size();
    if (n < 2) throw std::invalid_argument("train_test_split needs at least two genes");

    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

    const auto top = top_genes_by_label(pool, 0.10);
    const std::set<GeneId> top_set(top.begin(), top.end());
    std::vector<GeneId> rest;
    for (const auto& id : pool.ids())
        if (top_set.count(id) == 0) rest.push_back(id);
    std::vector<GeneId> top_sorted(top_set.begin(), top_set.end());

    auto n_test_top = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(top_sorted.size())));
    n_test_top = std::min({n_test_top, top_sorted.size(), n_test});
    const auto n_test_rest = std::min(n_test - n_test_top, rest.size());

    std::mt19937_64 rng(derive_seed(seed, Stream::split));
    std::shuffle(top_sorted.begin(), top_sorted.end(), rng);
    std::shuffle(rest.begin(), rest.end(), rng);

    Split split;
    split.test.assign(top_sorted.begin(), top_sorted.begin() + static_cast<std::ptrdiff_t>(n_test_top));
    split.test.insert(split.test.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(n_test_rest));
    split.train.assign(top_sorted.begin() + static_cast<std::ptrdiff_t>(n_test_top), top_sorted.end());
    split.train.insert(split.train.end(), rest.begin() + static_cast<std::ptrdiff_t>(n_test_rest), rest.end());
    std::sort(split.test.begin(), split.test.end());
    std::sort(split.train.begin(), split.train.end());
    return split;
}

}  // namespace biobo
