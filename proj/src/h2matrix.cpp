#include "h2mul/h2matrix.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace h2mul {

ClusterBasis::ClusterBasis(std::shared_ptr<const ClusterTree> cluster_tree) : tree(std::move(cluster_tree)) {
    const auto n = static_cast<std::size_t>(tree->size());
    leaf.resize(n);
    transfer.resize(n);
    rank.assign(n, 0);
}

Index ClusterBasis::max_rank() const {
    return rank.empty() ? 0 : *std::max_element(rank.begin(), rank.end());
}

Matrix expand_basis(const ClusterBasis& basis, int cluster) {
    const auto& c = basis.clusters()[cluster];
    if (c.is_leaf()) return basis.leaf[cluster];
    Matrix V(c.size(), basis.rank[cluster]);
    for (int child : c.children) {
        const auto& cc = basis.clusters()[child];
        V.middleRows(cc.begin - c.begin, cc.size()) = expand_basis(basis, child) * basis.transfer[child];
    }
    return V;
}

namespace {

Matrix project_rec(const ClusterBasis& basis, int cluster, const Eigen::Ref<const Matrix>& X) {
    const auto& c = basis.clusters()[cluster];
    if (c.is_leaf()) return basis.leaf[cluster].transpose() * X;
    Matrix out = Matrix::Zero(basis.rank[cluster], X.cols());
    for (int child : c.children) {
        const auto& cc = basis.clusters()[child];
        out.noalias() += basis.transfer[child].transpose() *
                         project_rec(basis, child, X.middleRows(cc.begin - c.begin, cc.size()));
    }
    return out;
}

}  // namespace

Matrix project_onto_basis(const ClusterBasis& basis, int cluster, const Matrix& X) {
    if (X.rows() != basis.clusters()[cluster].size())
        throw std::invalid_argument("project_onto_basis: row count does not match the cluster");
    return project_rec(basis, cluster, X);
}

//
// matrix-vector products
//

namespace {

// Forward transform, coupling and backward transform for one block subtree.
class BlockApply {
public:
    BlockApply(const H2Matrix& G, int block, bool adjoint)
        : G_(G), adjoint_(adjoint),
          in_tree_(adjoint ? G.row_tree() : G.col_tree()),
          out_tree_(adjoint ? G.col_tree() : G.row_tree()),
          in_basis_(adjoint ? *G.row_basis : *G.col_basis),
          out_basis_(adjoint ? *G.col_basis : *G.row_basis),
          in_root_(adjoint ? G.blocks()[block].row : G.blocks()[block].col),
          out_root_(adjoint ? G.blocks()[block].col : G.blocks()[block].row),
          block_(block) {}

    Matrix run(const Matrix& X) {
        const auto& in_c = in_tree_[in_root_];
        const auto& out_c = out_tree_[out_root_];
        if (X.rows() != in_c.size()) throw std::invalid_argument("apply_block: dimension mismatch");

        x_ = &X;
        xhat_.assign(in_c.subtree_end - in_root_, Matrix());
        yhat_.assign(out_c.subtree_end - out_root_, Matrix());
        y_ = Matrix::Zero(out_c.size(), X.cols());

        forward(in_root_);
        couple(block_);
        backward(out_root_);
        return std::move(y_);
    }

private:
    Index in_offset(int c) const { return in_tree_[c].begin - in_tree_[in_root_].begin; }
    Index out_offset(int c) const { return out_tree_[c].begin - out_tree_[out_root_].begin; }

    void forward(int c) {
        const auto& cl = in_tree_[c];
        Matrix& xc = xhat_[c - in_root_];
        if (cl.is_leaf()) {
            xc.noalias() = in_basis_.leaf[c].transpose() * x_->middleRows(in_offset(c), cl.size());
            return;
        }
        xc = Matrix::Zero(in_basis_.rank[c], x_->cols());
        for (int child : cl.children) {
            forward(child);
            xc.noalias() += in_basis_.transfer[child].transpose() * xhat_[child - in_root_];
        }
    }

    void couple(int b) {
        const auto& blk = G_.blocks()[b];
        const int in_c = adjoint_ ? blk.row : blk.col;
        const int out_c = adjoint_ ? blk.col : blk.row;
        switch (blk.kind) {
        case BlockKind::admissible: {
            Matrix& yc = yhat_[out_c - out_root_];
            if (yc.size() == 0) yc = Matrix::Zero(out_basis_.rank[out_c], x_->cols());
            if (adjoint_)
                yc.noalias() += G_.coupling[b].transpose() * xhat_[in_c - in_root_];
            else
                yc.noalias() += G_.coupling[b] * xhat_[in_c - in_root_];
            break;
        }
        case BlockKind::inadmissible: {
            const auto xs = x_->middleRows(in_offset(in_c), in_tree_[in_c].size());
            auto ys = y_.middleRows(out_offset(out_c), out_tree_[out_c].size());
            if (adjoint_)
                ys.noalias() += G_.nearfield[b].transpose() * xs;
            else
                ys.noalias() += G_.nearfield[b] * xs;
            break;
        }
        case BlockKind::subdivided:
            for (int child : blk.children) couple(child);
            break;
        }
    }

    void backward(int c) {
        const auto& cl = out_tree_[c];
        Matrix& yc = yhat_[c - out_root_];
        if (cl.is_leaf()) {
            if (yc.size() != 0) y_.middleRows(out_offset(c), cl.size()).noalias() += out_basis_.leaf[c] * yc;
            return;
        }
        for (int child : cl.children) {
            if (yc.size() != 0) {
                Matrix& ych = yhat_[child - out_root_];
                if (ych.size() == 0) ych = Matrix::Zero(out_basis_.rank[child], x_->cols());
                ych.noalias() += out_basis_.transfer[child] * yc;
            }
            backward(child);
        }
    }

    const H2Matrix& G_;
    bool adjoint_;
    const ClusterTree& in_tree_;
    const ClusterTree& out_tree_;
    const ClusterBasis& in_basis_;
    const ClusterBasis& out_basis_;
    int in_root_, out_root_, block_;

    const Matrix* x_ = nullptr;
    std::vector<Matrix> xhat_, yhat_;
    Matrix y_;
};

}  // namespace

Matrix apply_block(const H2Matrix& G, int block, const Matrix& X, bool adjoint) {
    return BlockApply(G, block, adjoint).run(X);
}

Vector h2_matvec(const H2Matrix& G, const Vector& x) {
    if (x.size() != G.cols()) throw std::invalid_argument("h2_matvec: dimension mismatch");
    return apply_block(G, 0, x, false);
}

Vector h2_matvec_adjoint(const H2Matrix& G, const Vector& x) {
    if (x.size() != G.rows()) throw std::invalid_argument("h2_matvec_adjoint: dimension mismatch");
    return apply_block(G, 0, x, true);
}

//
// basis products
//

bool same_cluster_structure(const ClusterTree& a, const ClusterTree& b) {
    if (&a == &b) return true;
    if (a.size() != b.size()) return false;
    for (int c = 0; c < a.size(); ++c)
        if (a[c].begin != b[c].begin || a[c].end != b[c].end || a[c].children != b[c].children) return false;
    return true;
}

BasisProductMap basis_products(const ClusterBasis& colbasis_x, const ClusterBasis& rowbasis_y) {
    const auto& tree = colbasis_x.clusters();
    if (!same_cluster_structure(tree, rowbasis_y.clusters()))
        throw std::invalid_argument("basis_products: bases live on different cluster trees");

    BasisProductMap P;
    P.product.resize(tree.size());
    // preorder numbering: children always carry larger ids than their parent
    for (int s = tree.size() - 1; s >= 0; --s) {
        const auto& cl = tree[s];
        if (cl.is_leaf()) {
            P.product[s].noalias() = colbasis_x.leaf[s].transpose() * rowbasis_y.leaf[s];
            continue;
        }
        Matrix Ps = Matrix::Zero(colbasis_x.rank[s], rowbasis_y.rank[s]);
        for (int child : cl.children)
            Ps.noalias() += colbasis_x.transfer[child].transpose() * P.product[child] * rowbasis_y.transfer[child];
        P.product[s] = std::move(Ps);
    }
    return P;
}

//
// dense conversion
//

Matrix block_to_dense(const H2Matrix& G, int block) {
    const auto& blk = G.blocks()[block];
    const auto& t = G.row_tree()[blk.row];
    const auto& s = G.col_tree()[blk.col];
    switch (blk.kind) {
    case BlockKind::admissible:
        return expand_basis(*G.row_basis, blk.row) * G.coupling[block] *
               expand_basis(*G.col_basis, blk.col).transpose();
    case BlockKind::inadmissible:
        return G.nearfield[block];
    case BlockKind::subdivided:
        break;
    }
    Matrix D(t.size(), s.size());
    for (int child : blk.children) {
        const auto& cb = G.blocks()[child];
        const auto& ct = G.row_tree()[cb.row];
        const auto& cs = G.col_tree()[cb.col];
        D.block(ct.begin - t.begin, cs.begin - s.begin, ct.size(), cs.size()) = block_to_dense(G, child);
    }
    return D;
}

Matrix to_dense(const H2Matrix& G, Index limit) {
    if (G.rows() > limit || G.cols() > limit)
        throw std::length_error("to_dense: matrix exceeds the dense oracle limit");
    return block_to_dense(G, 0);
}

//
// serialization
//

namespace {

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

constexpr char magic[8] = {'H', '2', 'M', 'U', 'L', 'B', 'I', 'N'};
constexpr std::uint32_t format_version = 1;

template <class T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("h2 file: unexpected end of data");
    return value;
}

void put_matrix(std::ostream& out, const Matrix& m) {
    put<std::uint64_t>(out, m.rows());
    put<std::uint64_t>(out, m.cols());
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Matrix get_matrix(std::istream& in) {
    const auto rows = static_cast<Index>(get<std::uint64_t>(in));
    const auto cols = static_cast<Index>(get<std::uint64_t>(in));
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in) throw std::runtime_error("h2 file: truncated matrix");
    return m;
}

void put_tree(std::ostream& out, const ClusterTree& tree) {
    put<std::uint64_t>(out, tree.dimension());
    put<std::uint64_t>(out, tree.leaf_size);
    put<std::uint64_t>(out, tree.size());
    for (const auto& c : tree.clusters) {
        put<std::int64_t>(out, c.begin);
        put<std::int64_t>(out, c.end);
        put<std::int32_t>(out, c.parent);
        for (int d = 0; d < 3; ++d) put<double>(out, c.box.lower[d]);
        for (int d = 0; d < 3; ++d) put<double>(out, c.box.upper[d]);
    }
    for (Index i : tree.index_at) put<std::uint64_t>(out, i);
}

std::shared_ptr<ClusterTree> get_tree(std::istream& in) {
    auto tree = std::make_shared<ClusterTree>();
    const auto n = static_cast<Index>(get<std::uint64_t>(in));
    tree->leaf_size = static_cast<Index>(get<std::uint64_t>(in));
    const auto count = get<std::uint64_t>(in);
    tree->clusters.resize(count);
    for (std::uint64_t id = 0; id < count; ++id) {
        auto& c = tree->clusters[id];
        c.begin = get<std::int64_t>(in);
        c.end = get<std::int64_t>(in);
        c.parent = get<std::int32_t>(in);
        for (int d = 0; d < 3; ++d) c.box.lower[d] = get<double>(in);
        for (int d = 0; d < 3; ++d) c.box.upper[d] = get<double>(in);
        if (c.parent >= 0) {
            if (static_cast<std::uint64_t>(c.parent) >= id) throw std::runtime_error("h2 file: clusters not in preorder");
            tree->clusters[c.parent].children.push_back(static_cast<int>(id));
            c.level = tree->clusters[c.parent].level + 1;
            tree->depth = std::max(tree->depth, c.level);
        }
    }
    for (int id = tree->size() - 1; id >= 0; --id) {
        auto& c = tree->clusters[id];
        c.subtree_end = c.is_leaf() ? id + 1 : tree->clusters[c.children.back()].subtree_end;
    }
    tree->index_at.resize(n);
    tree->position_of.resize(n);
    for (Index pos = 0; pos < n; ++pos) {
        tree->index_at[pos] = static_cast<Index>(get<std::uint64_t>(in));
        if (tree->index_at[pos] < 0 || tree->index_at[pos] >= n) throw std::runtime_error("h2 file: bad permutation");
        tree->position_of[tree->index_at[pos]] = pos;
    }
    return tree;
}

void put_basis(std::ostream& out, const ClusterBasis& basis) {
    const auto& tree = basis.clusters();
    for (int c = 0; c < tree.size(); ++c) {
        put<std::uint64_t>(out, basis.rank[c]);
        if (tree[c].is_leaf()) put_matrix(out, basis.leaf[c]);
        if (tree[c].parent >= 0) put_matrix(out, basis.transfer[c]);
    }
}

std::shared_ptr<ClusterBasis> get_basis(std::istream& in, std::shared_ptr<const ClusterTree> tree) {
    auto basis = std::make_shared<ClusterBasis>(tree);
    for (int c = 0; c < tree->size(); ++c) {
        basis->rank[c] = static_cast<Index>(get<std::uint64_t>(in));
        if ((*tree)[c].is_leaf()) basis->leaf[c] = get_matrix(in);
        if ((*tree)[c].parent >= 0) basis->transfer[c] = get_matrix(in);
    }
    return basis;
}

}  // namespace

void save_h2(std::ostream& out, const H2Matrix& G) {
    out.write(magic, sizeof(magic));
    put<std::uint32_t>(out, format_version);

    const bool shared_tree = G.structure->row_tree == G.structure->col_tree;
    put_tree(out, G.row_tree());
    put<std::uint8_t>(out, shared_tree ? 1 : 0);
    if (!shared_tree) put_tree(out, G.col_tree());

    const auto& bt = G.blocks();
    put<double>(out, bt.eta);
    put<std::uint64_t>(out, bt.size());
    for (const auto& b : bt.blocks) {
        put<std::int32_t>(out, b.row);
        put<std::int32_t>(out, b.col);
        put<std::int32_t>(out, b.parent);
        put<std::uint8_t>(out, static_cast<std::uint8_t>(b.kind));
    }

    put_basis(out, *G.row_basis);
    put_basis(out, *G.col_basis);

    for (int b = 0; b < bt.size(); ++b) {
        if (bt[b].kind == BlockKind::admissible) put_matrix(out, G.coupling[b]);
        if (bt[b].kind == BlockKind::inadmissible) put_matrix(out, G.nearfield[b]);
    }
    if (!out) throw std::runtime_error("h2 file: write failed");
}

H2Matrix load_h2(std::istream& in) {
    char header[sizeof(magic)];
    in.read(header, sizeof(header));
    if (!in || std::memcmp(header, magic, sizeof(magic)) != 0) throw std::runtime_error("h2 file: bad magic");
    if (get<std::uint32_t>(in) != format_version) throw std::runtime_error("h2 file: unsupported version");

    std::shared_ptr<const ClusterTree> rows = get_tree(in);
    std::shared_ptr<const ClusterTree> cols = get<std::uint8_t>(in) ? rows : get_tree(in);

    auto bt = std::make_shared<BlockTree>();
    bt->row_tree = rows;
    bt->col_tree = cols;
    bt->eta = get<double>(in);
    const auto count = get<std::uint64_t>(in);
    for (std::uint64_t id = 0; id < count; ++id) {
        const int row = get<std::int32_t>(in);
        const int col = get<std::int32_t>(in);
        const int parent = get<std::int32_t>(in);
        const auto kind = static_cast<BlockKind>(get<std::uint8_t>(in));
        if (row < 0 || row >= rows->size() || col < 0 || col >= cols->size() ||
            parent >= static_cast<int>(id))
            throw std::runtime_error("h2 file: inconsistent block tree");
        bt->append(row, col, parent, kind);
    }

    H2Matrix G;
    G.structure = bt;
    G.row_basis = get_basis(in, rows);
    G.col_basis = get_basis(in, cols);
    G.coupling.resize(bt->size());
    G.nearfield.resize(bt->size());
    for (int b = 0; b < bt->size(); ++b) {
        if ((*bt)[b].kind == BlockKind::admissible) G.coupling[b] = get_matrix(in);
        if ((*bt)[b].kind == BlockKind::inadmissible) G.nearfield[b] = get_matrix(in);
    }
    return G;
}

void save_h2(const std::string& path, const H2Matrix& G) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    save_h2(out, G);
}

H2Matrix load_h2(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return load_h2(in);
}

}  // namespace h2mul
