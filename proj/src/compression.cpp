#include "h2mul/compression.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <deque>
#include <future>
#include <random>
#include <stdexcept>

namespace h2mul {

double TruncationControl::recompress_eps() const {
    return target_eps * std::sqrt(1.0 - sigma * theta);
}

void TruncationControl::validate() const {
    if (!(target_eps > 0.0 && target_eps < 1.0)) throw std::invalid_argument("tolerance must lie in (0, 1)");
    if (!(theta > 0.0) || !(sigma >= 1.0) || !(sigma * theta < 1.0))
        throw std::invalid_argument("level damping must satisfy 0 < theta < 1/sigma");
    if (power_iterations < 1) throw std::invalid_argument("power iteration needs at least one step");
}

//
// dense helpers
//

double spectral_norm_lower_bound(const std::function<Vector(const Vector&)>& apply,
                                 const std::function<Vector(const Vector&)>& apply_adjoint,
                                 Index dim, int iterations, std::uint64_t seed) {
    if (iterations < 1) throw std::invalid_argument("power iteration needs at least one step");
    if (dim == 0) return 0.0;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    Vector x(dim);
    for (Index i = 0; i < dim; ++i) x[i] = normal(rng);
    x.normalize();
    for (int it = 0; it < iterations; ++it) {
        const Vector z = apply_adjoint(apply(x));
        const double nz = z.norm();
        if (nz == 0.0) return 0.0;
        x = z / nz;
    }
    return apply(x).norm();
}

double spectral_norm_lower_bound(const Matrix& A, int iterations, std::uint64_t seed) {
    return spectral_norm_lower_bound([&](const Vector& x) -> Vector { return A * x; },
                                     [&](const Vector& y) -> Vector { return A.transpose() * y; },
                                     A.cols(), iterations, seed);
}

namespace {

// Thin QR with Q kept implicit.
struct ThinQR {
    Eigen::HouseholderQR<Matrix> qr;
    Index p;

    explicit ThinQR(const Matrix& M) : qr(M), p(std::min(M.rows(), M.cols())) {}

    Matrix R() const { return qr.matrixQR().topRows(p).triangularView<Eigen::Upper>(); }

    // Q * X for X with p rows
    Matrix Q_times(const Matrix& X) const {
        Matrix Y = Matrix::Zero(qr.rows(), X.cols());
        Y.topRows(p) = X;
        Y.applyOnTheLeft(qr.householderQ());
        return Y;
    }
};

Index cutoff_rank(const Vector& sv, double threshold) {
    Index rho = 0;
    while (rho < sv.size() && sv[rho] > threshold) ++rho;
    return rho;
}

}  // namespace

LowRankBlock truncate(const Matrix& A, const Matrix& B, double eps) {
    if (A.cols() != B.cols()) throw std::invalid_argument("truncate: factor ranks differ");
    if (A.cols() == 0 || A.rows() == 0 || B.rows() == 0)
        return {Matrix(A.rows(), 0), Matrix(B.rows(), 0)};

    const ThinQR qa(A), qb(B);
    const Matrix core = qa.R() * qb.R().transpose();
    Eigen::BDCSVD<Matrix> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& sv = svd.singularValues();
    const Index rho = sv.size() == 0 || sv[0] == 0.0 ? 0 : cutoff_rank(sv, eps * sv[0]);

    LowRankBlock out;
    out.A = qa.Q_times(svd.matrixU().leftCols(rho) * sv.head(rho).asDiagonal());
    out.B = qb.Q_times(svd.matrixV().leftCols(rho));
    return out;
}

LowRankBlock truncate(const LowRankBlock& block, double eps) {
    return truncate(block.A, block.B, eps);
}

namespace {

LowRankBlock merge_horizontal(const LowRankBlock& left, const LowRankBlock& right, double eps) {
    if (left.rows() != right.rows()) throw std::invalid_argument("agglomerate: row counts differ");
    Matrix A(left.rows(), left.rank() + right.rank());
    A << left.A, right.A;
    Matrix B = Matrix::Zero(left.cols() + right.cols(), left.rank() + right.rank());
    B.topLeftCorner(left.cols(), left.rank()) = left.B;
    B.bottomRightCorner(right.cols(), right.rank()) = right.B;
    return truncate(A, B, eps);
}

LowRankBlock merge_vertical(const LowRankBlock& top, const LowRankBlock& bottom, double eps) {
    if (top.cols() != bottom.cols()) throw std::invalid_argument("agglomerate: column counts differ");
    Matrix A = Matrix::Zero(top.rows() + bottom.rows(), top.rank() + bottom.rank());
    A.topLeftCorner(top.rows(), top.rank()) = top.A;
    A.bottomRightCorner(bottom.rows(), bottom.rank()) = bottom.A;
    Matrix B(top.cols(), top.rank() + bottom.rank());
    B << top.B, bottom.B;
    return truncate(A, B, eps);
}

}  // namespace

LowRankBlock agglomerate(const std::vector<std::vector<LowRankBlock>>& blocks, double eps) {
    if (blocks.empty() || blocks.front().empty()) throw std::invalid_argument("agglomerate: empty arrangement");
    const auto n = blocks.front().size();
    for (const auto& row : blocks)
        if (row.size() != n) throw std::invalid_argument("agglomerate: ragged arrangement");
    for (std::size_t j = 0; j < n; ++j)
        for (const auto& row : blocks)
            if (row[j].cols() != blocks.front()[j].cols()) throw std::invalid_argument("agglomerate: column counts differ");

    std::vector<LowRankBlock> rows;
    rows.reserve(blocks.size());
    for (const auto& row : blocks) {
        LowRankBlock acc = row.front();
        for (std::size_t j = 1; j < n; ++j) acc = merge_horizontal(acc, row[j], eps);
        rows.push_back(std::move(acc));
    }
    LowRankBlock acc = std::move(rows.front());
    for (std::size_t i = 1; i < rows.size(); ++i) acc = merge_vertical(acc, rows[i], eps);
    return acc;
}

//
// BlockwiseLowRank
//

Matrix BlockwiseLowRank::to_dense(Index limit) const {
    const auto& rows = *structure->row_tree;
    const auto& cols = *structure->col_tree;
    if (rows.dimension() > limit || cols.dimension() > limit)
        throw std::length_error("to_dense: matrix exceeds the dense oracle limit");
    Matrix D = Matrix::Zero(rows.dimension(), cols.dimension());
    for (int b : structure->leaves()) {
        const auto& blk = (*structure)[b];
        const auto& t = rows[blk.row];
        const auto& r = cols[blk.col];
        D.block(t.begin, r.begin, t.size(), r.size()) =
            blk.kind == BlockKind::admissible ? lowrank[b].dense() : dense[b];
    }
    return D;
}

Index BlockwiseLowRank::stored_reals() const {
    Index total = 0;
    for (const auto& lr : lowrank) total += lr.A.size() + lr.B.size();
    for (const auto& d : dense) total += d.size();
    return total;
}

//
// coarsening
//

LowRankBlock to_lowrank(const ProductEngine& engine, const Accumulator& acc) {
    if (!acc.pending.empty()) throw std::logic_error("to_lowrank: accumulator still has pending products");
    const auto& t = engine.row_tree()[acc.row];
    const auto& r = engine.col_tree()[acc.col];
    const Index ka = acc.alpha ? engine.col_basis().rank[acc.col] : 0;
    const Index kb = acc.beta ? engine.row_basis().rank[acc.row] : 0;
    const Index kn = acc.N ? std::min(t.size(), r.size()) : 0;

    LowRankBlock out{Matrix(t.size(), ka + kb + kn), Matrix(r.size(), ka + kb + kn)};
    if (ka > 0) {
        out.A.leftCols(ka) = engine.alpha_yield(acc);
        out.B.leftCols(ka) = expand_basis(engine.col_basis(), acc.col);
    }
    if (kb > 0) {
        out.A.middleCols(ka, kb) = expand_basis(engine.row_basis(), acc.row);
        out.B.middleCols(ka, kb) = engine.beta_yield(acc);
    }
    if (kn > 0) {
        if (r.size() <= t.size()) {
            out.A.rightCols(kn) = *acc.N;
            out.B.rightCols(kn).setIdentity();
        } else {
            out.A.rightCols(kn).setIdentity();
            out.B.rightCols(kn) = acc.N->transpose();
        }
    }
    return out;
}

namespace {

// Walks the exact product held in memory.
struct StoredProduct {
    using Node = int;
    const ExactProduct* product;

    bool resolve(Node& id) const { return (*product->induced)[id].is_leaf(); }
    std::vector<Node> children(Node& id) const { return (*product->induced)[id].children; }
    const Accumulator& accumulator(const Node& id) const { return product->leaf[id]; }
    std::pair<int, int> clusters(const Node& id) const {
        return {(*product->induced)[id].row, (*product->induced)[id].col};
    }
};

// Splits accumulators on demand; parents are released once split.
struct StreamedProduct {
    using Node = Accumulator;
    const ProductEngine* engine;

    bool resolve(Node& acc) const {
        if (!acc.pending.empty() && engine->row_tree()[acc.row].is_leaf() && engine->col_tree()[acc.col].is_leaf())
            engine->drain(acc);
        return acc.pending.empty();
    }
    std::vector<Node> children(Node& acc) const {
        auto out = engine->split(acc);
        acc = Accumulator{acc.row, acc.col, nullptr, nullptr, std::nullopt, {}, false};
        return out;
    }
    const Accumulator& accumulator(const Node& acc) const { return acc; }
    std::pair<int, int> clusters(const Node& acc) const { return {acc.row, acc.col}; }
};

template <class Provider>
class Coarsener {
public:
    using Node = typename Provider::Node;

    Coarsener(const ProductEngine& engine, Provider provider, std::shared_ptr<const BlockTree> target, double eps,
              int threads)
        : engine_(engine), provider_(std::move(provider)), target_(std::move(target)), eps_(eps),
          threads_(threads) {
        if (!(eps > 0.0)) throw std::invalid_argument("coarsen: tolerance must be positive");
        if (!same_cluster_structure(*target_->row_tree, engine.row_tree()) ||
            !same_cluster_structure(*target_->col_tree, engine.col_tree()))
            throw std::invalid_argument("coarsen: target tree does not match the product");
        out_.structure = target_;
        out_.lowrank.resize(target_->size());
        out_.dense.resize(target_->size());
    }

    BlockwiseLowRank run(Node root) {
        visit(std::move(root), 0);
        for (auto& f : inflight_) f.get();
        inflight_.clear();
        return std::move(out_);
    }

private:
    struct Part {
        LowRankBlock block;
        bool exact;
    };

    Part approximate(Node node, double budget) {
        if (provider_.resolve(node)) return {to_lowrank(engine_, provider_.accumulator(node)), true};

        const auto [t, r] = provider_.clusters(node);
        const auto& tc = engine_.row_tree()[t];
        const auto& rc = engine_.col_tree()[r];
        const std::size_t m = tc.is_leaf() ? 1 : tc.children.size();
        const std::size_t n = rc.is_leaf() ? 1 : rc.children.size();

        auto kids = provider_.children(node);
        const double child_budget = budget / (2.0 * std::sqrt(static_cast<double>(kids.size())));
        std::vector<Part> parts;
        parts.reserve(kids.size());
        for (auto& kid : kids) parts.push_back(approximate(std::move(kid), child_budget));
        kids.clear();

        bool all_exact = true;
        for (const auto& p : parts) all_exact = all_exact && p.exact;
        double merge_eps = budget;
        if (!all_exact) {
            merge_eps = 0.5 * budget / (1.0 + 0.5 * budget);
            for (auto& p : parts)
                if (p.exact) p.block = truncate(p.block, child_budget);
        }

        std::vector<std::vector<LowRankBlock>> grid(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) grid[i].push_back(std::move(parts[i * n + j].block));
        return {agglomerate(grid, merge_eps / (2.0 * m * n)), false};
    }

    void visit(Node node, int tb) {
        const auto& blk = (*target_)[tb];
        const auto [t, r] = provider_.clusters(node);
        if (t != blk.row || r != blk.col) throw std::logic_error("coarsen: product and target blocks out of step");

        switch (blk.kind) {
        case BlockKind::admissible:
            if (threads_ > 1) {
                if (static_cast<int>(inflight_.size()) >= threads_) {
                    inflight_.front().get();
                    inflight_.pop_front();
                }
                inflight_.push_back(std::async(std::launch::async, [this, tb, n = std::move(node)]() mutable {
                    out_.lowrank[tb] = approximate(std::move(n), eps_).block;
                }));
            } else {
                out_.lowrank[tb] = approximate(std::move(node), eps_).block;
            }
            return;
        case BlockKind::inadmissible:
            if (!provider_.resolve(node))
                throw std::invalid_argument("coarsen: inadmissible target block is subdivided in the product");
            out_.dense[tb] = engine_.dense(provider_.accumulator(node));
            return;
        case BlockKind::subdivided:
            break;
        }
        if (provider_.resolve(node))
            throw std::invalid_argument("coarsen: target block is finer than the product block structure");
        auto kids = provider_.children(node);
        if (kids.size() != blk.children.size()) throw std::logic_error("coarsen: child count mismatch");
        for (std::size_t i = 0; i < kids.size(); ++i) visit(std::move(kids[i]), blk.children[i]);
    }

    const ProductEngine& engine_;
    Provider provider_;
    std::shared_ptr<const BlockTree> target_;
    double eps_;
    int threads_;
    BlockwiseLowRank out_;
    std::deque<std::future<void>> inflight_;
};

}  // namespace

BlockwiseLowRank coarsen(const ProductEngine& engine, const ExactProduct& product,
                         std::shared_ptr<const BlockTree> target, double eps) {
    Coarsener<StoredProduct> c(engine, StoredProduct{&product}, std::move(target), eps, 1);
    return c.run(0);
}

BlockwiseLowRank coarsen(const ProductEngine& engine, std::shared_ptr<const BlockTree> target, double eps,
                         const CoarsenOptions& options) {
    Coarsener<StreamedProduct> c(engine, StreamedProduct{&engine}, std::move(target), eps,
                                 std::max(1, options.threads));
    return c.run(engine.root());
}

//
// recompression
//

namespace {

// One admissible block seen from the side whose basis is being built:
// the block is L R^T with L on `cluster`.
struct SideFactor {
    int block;
    int cluster;
    const Matrix* L;
    Matrix Rt;  // R^T from the thin QR of the other factor, so that G^c = L * Rt
    double weight;
};

class BasisBuilder {
public:
    BasisBuilder(std::shared_ptr<const ClusterTree> tree, std::vector<SideFactor> factors, double eps, double theta,
                 std::vector<LocalError>* errors)
        : tree_(*tree), basis_(std::make_shared<ClusterBasis>(tree)), factors_(std::move(factors)), eps_(eps),
          theta_(theta), errors_(errors) {
        own_.resize(tree_.size());
        for (std::size_t i = 0; i < factors_.size(); ++i)
            if (factors_[i].weight > 0.0) own_[factors_[i].cluster].push_back(static_cast<int>(i));
    }

    std::shared_ptr<ClusterBasis> run() {
        build(0, {});
        return basis_;
    }

private:
    // Returns V_s^T G^c_b for every inherited factor b.
    std::vector<Matrix> build(int s, const std::vector<int>& inherited) {
        const auto& cl = tree_[s];
        std::vector<int> active = inherited;
        active.insert(active.end(), own_[s].begin(), own_[s].end());

        std::vector<Matrix> local(active.size());
        if (cl.is_leaf()) {
            for (std::size_t i = 0; i < active.size(); ++i) {
                const auto& f = factors_[active[i]];
                local[i] = f.L->middleRows(cl.begin - tree_[f.cluster].begin, cl.size()) * f.Rt;
            }
        } else {
            std::vector<std::vector<Matrix>> sub;
            for (int child : cl.children) sub.push_back(build(child, active));
            const Index stacked = child_rank_sum(s);
            for (std::size_t i = 0; i < active.size(); ++i) {
                local[i].resize(stacked, factors_[active[i]].Rt.cols());
                Index offset = 0;
                for (std::size_t j = 0; j < sub.size(); ++j) {
                    local[i].middleRows(offset, sub[j][i].rows()) = sub[j][i];
                    offset += sub[j][i].rows();
                }
            }
        }

        const Index rows = cl.is_leaf() ? cl.size() : child_rank_sum(s);
        Index total = 0;
        for (std::size_t i = 0; i < active.size(); ++i) total += local[i].cols();
        Matrix W(rows, total);
        Index col = 0;
        for (std::size_t i = 0; i < active.size(); ++i) {
            const auto& f = factors_[active[i]];
            const double level_gap = cl.level - tree_[f.cluster].level;
            const double omega = std::pow(theta_, 0.5 * level_gap) * f.weight;
            W.middleCols(col, local[i].cols()) = local[i] / omega;
            col += local[i].cols();
        }

        const Matrix Q = leading_left_vectors(W);
        basis_->rank[s] = Q.cols();
        if (cl.is_leaf()) {
            basis_->leaf[s] = Q;
        } else {
            Index offset = 0;
            for (int child : cl.children) {
                basis_->transfer[child] = Q.middleRows(offset, basis_->rank[child]);
                offset += basis_->rank[child];
            }
        }

        if (errors_) {
            for (std::size_t i = 0; i < active.size(); ++i) {
                const Matrix E = local[i] - Q * (Q.transpose() * local[i]);
                const double spec = E.size() == 0 ? 0.0 : Eigen::BDCSVD<Matrix>(E).singularValues()(0);
                errors_->push_back(LocalError{s, factors_[active[i]].block, E.squaredNorm(), spec * spec});
            }
        }

        std::vector<Matrix> up(inherited.size());
        for (std::size_t i = 0; i < inherited.size(); ++i) up[i] = Q.transpose() * local[i];
        return up;
    }

    Index child_rank_sum(int s) const {
        Index rows = 0;
        for (int child : tree_[s].children) rows += basis_->rank[child];
        return rows;
    }

    // Left singular vectors of W for all singular values above eps.
    Matrix leading_left_vectors(const Matrix& W) const {
        if (W.cols() == 0 || W.rows() == 0) return Matrix(W.rows(), 0);
        Matrix U;
        Vector sv;
        if (W.cols() > W.rows()) {
            // W = R^T Q^T with R from the QR of W^T; only R^T matters for the left side
            const ThinQR qr(W.transpose());
            Eigen::BDCSVD<Matrix> svd(qr.R().transpose(), Eigen::ComputeThinU);
            U = svd.matrixU();
            sv = svd.singularValues();
        } else {
            Eigen::BDCSVD<Matrix> svd(W, Eigen::ComputeThinU);
            U = svd.matrixU();
            sv = svd.singularValues();
        }
        return U.leftCols(cutoff_rank(sv, eps_));
    }

    const ClusterTree& tree_;
    std::shared_ptr<ClusterBasis> basis_;
    std::vector<SideFactor> factors_;
    std::vector<std::vector<int>> own_;
    double eps_;
    double theta_;
    std::vector<LocalError>* errors_;
};

std::shared_ptr<ClusterBasis> adaptive_basis(const BlockwiseLowRank& Z, const TruncationControl& ctl, bool rows,
                                             RecompressionReport* report) {
    ctl.validate();
    const auto& bt = Z.blocks();
    std::vector<SideFactor> factors;
    std::vector<double> weights(bt.size(), 0.0);
    for (int b = 0; b < bt.size(); ++b) {
        if (bt[b].kind != BlockKind::admissible) continue;
        const auto& lr = Z.lowrank[b];
        const Matrix& L = rows ? lr.A : lr.B;
        const Matrix& other = rows ? lr.B : lr.A;
        if (lr.rank() == 0) continue;
        SideFactor f{b, rows ? bt[b].row : bt[b].col, &L, ThinQR(other).R().transpose(), 0.0};
        f.weight = spectral_norm_lower_bound([&](const Vector& x) -> Vector { return L * (f.Rt * x); },
                                             [&](const Vector& y) -> Vector { return f.Rt.transpose() * (L.transpose() * y); },
                                             f.Rt.cols(), ctl.power_iterations, ctl.seed);
        weights[b] = f.weight;
        factors.push_back(std::move(f));
    }
    std::vector<LocalError>* errors = nullptr;
    if (report) {
        (rows ? report->row_weight : report->col_weight) = weights;
        errors = rows ? &report->row_errors : &report->col_errors;
        errors->clear();
    }
    BasisBuilder builder(rows ? bt.row_tree : bt.col_tree, std::move(factors), ctl.recompress_eps(), ctl.theta,
                         errors);
    return builder.run();
}

}  // namespace

std::shared_ptr<ClusterBasis> adaptive_row_basis(const BlockwiseLowRank& Z, const TruncationControl& ctl,
                                                 RecompressionReport* report) {
    return adaptive_basis(Z, ctl, true, report);
}

std::shared_ptr<ClusterBasis> adaptive_col_basis(const BlockwiseLowRank& Z, const TruncationControl& ctl,
                                                 RecompressionReport* report) {
    return adaptive_basis(Z, ctl, false, report);
}

H2Matrix project_onto_bases(const BlockwiseLowRank& Z, std::shared_ptr<const ClusterBasis> rows,
                            std::shared_ptr<const ClusterBasis> cols) {
    const auto& bt = Z.blocks();
    H2Matrix G;
    G.structure = Z.structure;
    G.row_basis = std::move(rows);
    G.col_basis = std::move(cols);
    G.coupling.resize(bt.size());
    G.nearfield.resize(bt.size());
    for (int b = 0; b < bt.size(); ++b) {
        const auto& blk = bt[b];
        if (blk.kind == BlockKind::admissible) {
            const auto& lr = Z.lowrank[b];
            G.coupling[b] = project_onto_basis(*G.row_basis, blk.row, lr.A) *
                            project_onto_basis(*G.col_basis, blk.col, lr.B).transpose();
        } else if (blk.kind == BlockKind::inadmissible) {
            G.nearfield[b] = Z.dense[b];
        }
    }
    return G;
}

H2Matrix recompress(const BlockwiseLowRank& Z, const TruncationControl& ctl, RecompressionReport* report) {
    auto rows = adaptive_row_basis(Z, ctl, report);
    auto cols = adaptive_col_basis(Z, ctl, report);
    return project_onto_bases(Z, std::move(rows), std::move(cols));
}

H2Matrix multiply(const H2Matrix& X, const H2Matrix& Y, std::shared_ptr<const BlockTree> target,
                  const TruncationControl& ctl, const CoarsenOptions& options) {
    ctl.validate();
    const ProductEngine engine(X, Y);
    const auto Z = coarsen(engine, std::move(target), 0.25 * ctl.target_eps, options);
    TruncationControl rest = ctl;
    rest.target_eps = 0.75 * ctl.target_eps;
    return recompress(Z, rest);
}

}  // namespace h2mul
