#include "h2mul/product.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace h2mul {

//
// OperandView
//

Matrix OperandView::coupling(int block) const {
    return transposed_ ? Matrix(m_->coupling[block].transpose()) : m_->coupling[block];
}

Matrix OperandView::nearfield(int block) const {
    return transposed_ ? Matrix(m_->nearfield[block].transpose()) : m_->nearfield[block];
}

Matrix OperandView::apply(int block, const Matrix& Z) const {
    return apply_block(*m_, block, Z, transposed_);
}

//
// addproduct
//

BasisTree addproduct(const ProductSide& side, int block, const Matrix& S, BasisTree alpha) {
    const auto& view = side.view;
    const auto& basis = view.row_basis();
    const auto& tree = view.row_tree();
    const int t = view.row(block);
    const int s = view.col(block);

    switch (view.kind(block)) {
    case BlockKind::admissible: {
        const Matrix& Ps = (*side.P)[s];
        Matrix C = side.transpose_P ? Matrix(view.coupling(block) * (Ps.transpose() * S))
                                    : Matrix(view.coupling(block) * (Ps * S));
        return add(basis, alpha, uniform_node(tree, t, std::move(C)));
    }
    case BlockKind::inadmissible:
        return add(basis, alpha, nearfield_node(tree, t, view.nearfield(block) * (side.inner->leaf[s] * S)));
    case BlockKind::subdivided:
        break;
    }

    std::shared_ptr<BasisNode> branch;  // created once if t is split
    for (int child : view.blocks()[block].children) {
        const int t1 = view.row(child);
        const int s1 = view.col(child);
        const Matrix S1 = s1 == s ? S : Matrix(side.inner->transfer[s1] * S);
        if (t1 == t) {
            alpha = addproduct(side, child, S1, std::move(alpha));
            continue;
        }
        if (!branch) {
            BasisTree base = alpha ? finish(split(basis, alpha)) : zero_branch(tree, t, S.cols());
            branch = std::make_shared<BasisNode>(*base);
        }
        auto& slot = branch->children[tree.child_slot(t1)];
        slot = addproduct(side, child, S1, std::move(slot));
    }
    return branch ? BasisTree(std::move(branch)) : alpha;
}

//
// ProductEngine
//

ProductEngine::ProductEngine(const H2Matrix& X, const H2Matrix& Y)
    : x_(&X), y_(&Y), P_(basis_products(*X.col_basis, *Y.row_basis)) {}

ProductSide ProductEngine::row_side() const {
    return ProductSide{OperandView(*x_, false), y_->row_basis.get(), &P_, false};
}

ProductSide ProductEngine::col_side() const {
    return ProductSide{OperandView(*y_, true), x_->col_basis.get(), &P_, true};
}

Accumulator ProductEngine::root() const {
    Accumulator acc;
    accumulate(acc, 0, 0);
    return acc;
}

void ProductEngine::accumulate(Accumulator& acc, int xblock, int yblock) const {
    const auto& xb = x_->blocks()[xblock];
    const auto& yb = y_->blocks()[yblock];
    if (xb.col != yb.row) throw std::invalid_argument("accumulate: blocks do not share the middle cluster");
    if (xb.row != acc.row || yb.col != acc.col) throw std::invalid_argument("accumulate: product outside the block");

    auto add_dense = [&](Matrix D) {
        if (acc.N) *acc.N += D;
        else acc.N = std::move(D);
        acc.nearfield = true;
    };

    if (yb.kind == BlockKind::admissible) {
        acc.alpha = addproduct(row_side(), xblock, y_->coupling[yblock], std::move(acc.alpha));
    } else if (xb.kind == BlockKind::admissible) {
        acc.beta = addproduct(col_side(), yblock, x_->coupling[xblock].transpose(), std::move(acc.beta));
    } else if (xb.kind == BlockKind::inadmissible) {
        add_dense(apply_block(*y_, yblock, x_->nearfield[xblock].transpose(), true).transpose());
    } else if (yb.kind == BlockKind::inadmissible) {
        add_dense(apply_block(*x_, xblock, y_->nearfield[yblock]));
    } else {
        acc.pending.emplace_back(xblock, yblock);
    }
}

std::vector<Accumulator> ProductEngine::split(const Accumulator& acc) const {
    const auto& rows = row_tree();
    const auto& cols = col_tree();
    const int t = acc.row, r = acc.col;
    const bool split_t = !rows[t].is_leaf();
    const bool split_r = !cols[r].is_leaf();
    if (!split_t && !split_r) throw std::logic_error("split: both clusters are leaves");

    const std::vector<int> T1 = split_t ? rows[t].children : std::vector<int>{t};
    const std::vector<int> R1 = split_r ? cols[r].children : std::vector<int>{r};
    const auto& VX = row_basis();
    const auto& WY = col_basis();

    std::vector<BasisTree> alpha_rows(T1.size()), beta_rows(R1.size());
    for (std::size_t i = 0; i < T1.size(); ++i)
        alpha_rows[i] = split_t ? restrict_rows(VX, acc.alpha, static_cast<int>(i)) : acc.alpha;
    for (std::size_t j = 0; j < R1.size(); ++j)
        beta_rows[j] = split_r ? restrict_rows(WY, acc.beta, static_cast<int>(j)) : acc.beta;

    std::vector<Accumulator> out(T1.size() * R1.size());
    for (std::size_t i = 0; i < T1.size(); ++i)
        for (std::size_t j = 0; j < R1.size(); ++j) {
            auto& child = out[i * R1.size() + j];
            const int t1 = T1[i], r1 = R1[j];
            child.row = t1;
            child.col = r1;
            child.nearfield = acc.nearfield;
            child.alpha = split_r ? mul(alpha_rows[i], WY.transfer[r1].transpose()) : alpha_rows[i];
            child.beta = split_t ? mul(beta_rows[j], VX.transfer[t1].transpose()) : beta_rows[j];
            if (acc.N)
                child.N = acc.N->block(rows[t1].begin - rows[t].begin, cols[r1].begin - cols[r].begin,
                                       rows[t1].size(), cols[r1].size());
        }

    for (auto [xblock, yblock] : acc.pending) {
        for (int xc : x_->blocks()[xblock].children) {
            const auto& xcb = x_->blocks()[xc];
            for (int yc : y_->blocks()[yblock].children) {
                const auto& ycb = y_->blocks()[yc];
                if (xcb.col != ycb.row) continue;
                const std::size_t i = split_t ? rows.child_slot(xcb.row) : 0;
                const std::size_t j = split_r ? cols.child_slot(ycb.col) : 0;
                accumulate(out[i * R1.size() + j], xc, yc);
            }
        }
    }
    return out;
}

void ProductEngine::drain(Accumulator& acc) const {
    if (!row_tree()[acc.row].is_leaf() || !col_tree()[acc.col].is_leaf())
        throw std::logic_error("drain: block is not a leaf block");
    while (!acc.pending.empty()) {
        const auto pending = std::move(acc.pending);
        acc.pending.clear();
        for (auto [xblock, yblock] : pending)
            for (int xc : x_->blocks()[xblock].children)
                for (int yc : y_->blocks()[yblock].children)
                    if (x_->blocks()[xc].col == y_->blocks()[yc].row) accumulate(acc, xc, yc);
    }
}

Matrix ProductEngine::alpha_yield(const Accumulator& acc) const {
    return yield_into(row_basis(), acc.alpha.get(), acc.row, col_basis().rank[acc.col], nullptr, nullptr);
}

Matrix ProductEngine::beta_yield(const Accumulator& acc) const {
    return yield_into(col_basis(), acc.beta.get(), acc.col, row_basis().rank[acc.row], nullptr, nullptr);
}

Matrix ProductEngine::dense(const Accumulator& acc) const {
    const auto& t = row_tree()[acc.row];
    const auto& r = col_tree()[acc.col];
    Matrix D = acc.N ? *acc.N : Matrix::Zero(t.size(), r.size());
    if (acc.alpha) D.noalias() += alpha_yield(acc) * expand_basis(col_basis(), acc.col).transpose();
    if (acc.beta) D.noalias() += expand_basis(row_basis(), acc.row) * beta_yield(acc).transpose();
    for (auto [xblock, yblock] : acc.pending) D.noalias() += block_to_dense(*x_, xblock) * block_to_dense(*y_, yblock);
    return D;
}

//
// Structural product tree
//

namespace {

class ProductTreeBuilder {
public:
    ProductTreeBuilder(const BlockTree& xb, const BlockTree& yb, ProductTree& out, BlockTree& induced)
        : xb_(xb), yb_(yb), out_(out), induced_(induced) {}

    void run() { induce(0, 0, -1, {node(0, 0, -1)}, false); }

private:
    int node(int xblock, int yblock, int parent) {
        const int id = static_cast<int>(out_.nodes.size());
        const bool adm = xb_[xblock].kind == BlockKind::admissible || yb_[yblock].kind == BlockKind::admissible;
        out_.nodes.push_back(ProductNode{xb_[xblock].row, xb_[xblock].col, yb_[yblock].col, xblock, yblock,
                                         parent, -1, {}, adm});
        if (parent >= 0) out_.nodes[parent].children.push_back(id);
        return id;
    }

    bool subdivided(int id) const {
        const auto& p = out_.nodes[id];
        return xb_[p.xblock].kind == BlockKind::subdivided && yb_[p.yblock].kind == BlockKind::subdivided;
    }

    // creates the children of product node `id`
    std::vector<int> expand(int id) {
        std::vector<int> out;
        const auto& p = out_.nodes[id];
        const auto xchildren = xb_[p.xblock].children;
        const auto ychildren = yb_[p.yblock].children;
        for (int xc : xchildren)
            for (int yc : ychildren)
                if (xb_[xc].col == yb_[yc].row) out.push_back(node(xc, yc, id));
        return out;
    }

    void induce(int t, int r, int parent, std::vector<int> nodes, bool nearfield) {
        const int id = induced_.append(t, r, parent);
        const auto& rows = *xb_.row_tree;
        const auto& cols = *yb_.col_tree;

        std::vector<int> pending;
        auto classify = [&](const std::vector<int>& list) {
            for (int p : list) {
                out_.nodes[p].induced = id;
                if (subdivided(p)) pending.push_back(p);
                else if (!out_.nodes[p].admissible) nearfield = true;
            }
        };
        classify(nodes);

        if (!pending.empty() && rows[t].is_leaf() && cols[r].is_leaf()) {
            while (!pending.empty()) {
                std::vector<int> next;
                for (int p : pending) {
                    const auto c = expand(p);
                    next.insert(next.end(), c.begin(), c.end());
                }
                pending.clear();
                classify(next);
            }
        }
        if (pending.empty()) {
            induced_.blocks[id].kind = nearfield ? BlockKind::inadmissible : BlockKind::admissible;
            return;
        }

        const bool split_t = !rows[t].is_leaf();
        const bool split_r = !cols[r].is_leaf();
        const std::vector<int> T1 = split_t ? rows[t].children : std::vector<int>{t};
        const std::vector<int> R1 = split_r ? cols[r].children : std::vector<int>{r};
        std::vector<std::vector<int>> lists(T1.size() * R1.size());
        for (int p : pending)
            for (int c : expand(p)) {
                const auto& pc = out_.nodes[c];
                const std::size_t i = split_t ? rows.child_slot(pc.row) : 0;
                const std::size_t j = split_r ? cols.child_slot(pc.col) : 0;
                lists[i * R1.size() + j].push_back(c);
            }
        for (std::size_t i = 0; i < T1.size(); ++i)
            for (std::size_t j = 0; j < R1.size(); ++j)
                induce(T1[i], R1[j], id, std::move(lists[i * R1.size() + j]), nearfield);
    }

    const BlockTree& xb_;
    const BlockTree& yb_;
    ProductTree& out_;
    BlockTree& induced_;
};

}  // namespace

ProductTree build_product_tree(const BlockTree& xblocks, const BlockTree& yblocks) {
    if (!same_cluster_structure(*xblocks.col_tree, *yblocks.row_tree))
        throw std::invalid_argument("build_product_tree: middle cluster trees differ");
    ProductTree out;
    auto induced = std::make_shared<BlockTree>();
    induced->row_tree = xblocks.row_tree;
    induced->col_tree = yblocks.col_tree;
    induced->eta = xblocks.eta;
    ProductTreeBuilder(xblocks, yblocks, out, *induced).run();
    out.induced = std::move(induced);
    return out;
}

AdmissibilityReport check_product_admissibility(const BlockTree& xblocks, const BlockTree& yblocks,
                                        const ProductTree& product) {
    AdmissibilityReport report;
    const double eta = xblocks.eta;
    for (const auto& p : product.nodes) {
        if (p.is_leaf()) continue;
        const auto& bt = (*xblocks.row_tree)[p.row].box;
        const auto& bs = (*xblocks.col_tree)[p.middle].box;
        const auto& br = (*yblocks.col_tree)[p.col].box;
        const double lhs = eta / (eta + 1.0) * bt.distance(br);
        const double rhs = std::max({bt.diameter(), bs.diameter(), br.diameter()});
        ++report.checked;
        if (!(lhs < rhs)) ++report.violations;
        const double ratio = rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        report.worst_ratio = std::max(report.worst_ratio, ratio);
    }
    return report;
}

//
// Exact product
//

namespace {

void resolve(const ProductEngine& engine, Accumulator acc, int parent, BlockTree& induced,
             std::vector<Accumulator>& leaf) {
    const int id = induced.append(acc.row, acc.col, parent);
    if (!acc.pending.empty() && engine.row_tree()[acc.row].is_leaf() && engine.col_tree()[acc.col].is_leaf())
        engine.drain(acc);
    if (acc.pending.empty()) {
        induced.blocks[id].kind = acc.nearfield ? BlockKind::inadmissible : BlockKind::admissible;
        if (static_cast<int>(leaf.size()) <= id) leaf.resize(id + 1);
        leaf[id] = std::move(acc);
        return;
    }
    for (auto& child : engine.split(acc)) resolve(engine, std::move(child), id, induced, leaf);
}

}  // namespace

ExactProduct exact_product(const ProductEngine& engine) {
    auto induced = std::make_shared<BlockTree>();
    induced->row_tree = engine.X().structure->row_tree;
    induced->col_tree = engine.Y().structure->col_tree;
    induced->eta = engine.X().blocks().eta;
    ExactProduct out;
    resolve(engine, engine.root(), -1, *induced, out.leaf);
    out.leaf.resize(induced->size());
    out.induced = std::move(induced);
    return out;
}

Matrix to_dense(const ProductEngine& engine, const ExactProduct& product, Index limit) {
    const auto& rows = engine.row_tree();
    const auto& cols = engine.col_tree();
    if (rows.dimension() > limit || cols.dimension() > limit)
        throw std::length_error("to_dense: product exceeds the dense oracle limit");
    Matrix D(rows.dimension(), cols.dimension());
    for (int b : product.induced->leaves()) {
        const auto& acc = product.leaf[b];
        D.block(rows[acc.row].begin, cols[acc.col].begin, rows[acc.row].size(), cols[acc.col].size()) =
            engine.dense(acc);
    }
    return D;
}

}  // namespace h2mul
