#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace coevo {

using Shape = std::vector<Eigen::Index>;

Eigen::Index shape_size(const Shape& s);
std::string shape_str(const Shape& s);

/// One node of the gradient graph. Nodes are created by the tensor ops and
/// hold the forward value, the (lazily allocated) gradient buffer and a
/// closure that pushes this node's gradient into its parents.
struct TensorNode {
    Shape shape;
    Eigen::ArrayXd value;
    Eigen::ArrayXd grad;  // empty until backward touches this node
    bool requires_grad = false;
    std::string op;  // producing op, for diagnostics
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    bool has_grad() const { return grad.size() == value.size(); }
    void ensure_grad() {
        if (!has_grad()) grad = Eigen::ArrayXd::Zero(value.size());
    }
};

/// Value-semantic handle to a graph node. Dense row-major doubles.
/// Immutable after creation except for the grad buffer during backward.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

    static Tensor from(const Shape& shape, std::vector<double> data);
    static Tensor from(const Shape& shape, const Eigen::ArrayXd& data);
    static Tensor zeros(const Shape& shape);
    static Tensor ones(const Shape& shape);
    static Tensor full(const Shape& shape, double v);
    static Tensor scalar(double v);
    static Tensor randn(const Shape& shape, std::mt19937_64& rng, double stddev = 1.0);
    /// Wrap a row-major Eigen matrix as a constant 2-D tensor.
    static Tensor from_matrix(const Eigen::MatrixXd& m);

    bool valid() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int ndim() const { return static_cast<int>(node_->shape.size()); }
    Eigen::Index size() const { return node_->value.size(); }
    Eigen::Index dim(int axis) const;

    const Eigen::ArrayXd& values() const { return node_->value; }
    double item() const;
    double at(std::initializer_list<Eigen::Index> idx) const;
    Eigen::MatrixXd as_matrix() const;  // 1-D or 2-D tensors only

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool on = true);
    const Eigen::ArrayXd& grad() const;
    void zero_grad();
    /// Overwrite the stored values of a leaf tensor (optimizer updates,
    /// finite-difference probing). Graph nodes built from the old value
    /// are not recomputed.
    void set_values(const Eigen::ArrayXd& v);

    std::shared_ptr<TensorNode> node() const { return node_; }

  private:
    std::shared_ptr<TensorNode> node_;
};

// ---- elementwise suite -----------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);  // numpy-style broadcasting
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor tanh_op(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor abs_op(const Tensor& a);
Tensor sqrt_op(const Tensor& a);
Tensor square(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return hadamard(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return mul_scalar(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul_scalar(a, s); }
inline Tensor operator+(const Tensor& a, double s) { return add_scalar(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// ---- reductions ------------------------------------------------------------

Tensor sum(const Tensor& a);  // scalar
Tensor sum_axis(const Tensor& a, int axis, bool keepdim = false);
Tensor mean_axis(const Tensor& a, int axis, bool keepdim = false);
/// Biased standard deviation (divide by the axis extent). The gradient is
/// defined as 0 where the deviation vanishes, so constant slices stay finite.
Tensor std_axis(const Tensor& a, int axis, bool keepdim = false);

// ---- linear algebra --------------------------------------------------------

/// Batched matrix product: a [..,m,k] x b [..,k,n] -> [..,m,n] with
/// broadcastable batch extents.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax(const Tensor& a, int axis);

// ---- structural ops --------------------------------------------------------

Tensor reshape(const Tensor& a, const Shape& shape);
Tensor permute(const Tensor& a, const std::vector<int>& axes);
Tensor transpose_last2(const Tensor& a);
Tensor slice(const Tensor& a, int axis, Eigen::Index start, Eigen::Index len);
Tensor concat(const std::vector<Tensor>& parts, int axis);
/// Select rows along axis 0; gradients scatter-add back.
Tensor gather_rows(const Tensor& a, const std::vector<Eigen::Index>& indices);

// ---- backward --------------------------------------------------------------

/// Reverse-mode sweep from a scalar loss. Visits each node once in reverse
/// topological order; gradients accumulate additively across fan-out.
void backward(const Tensor& loss);

// ---- gradient checking -----------------------------------------------------

struct GradCheckEntry {
    int input_index = 0;
    Eigen::Index worst_coord = 0;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::vector<GradCheckEntry> per_input;
};

/// Compare analytic gradients of a scalar-valued tensor function against
/// central finite differences at the given step. Relative error uses
/// |a - n| / max(1, |a|, |n|). With max_coords >= 0 each input is probed at
/// most at that many coordinates, drawn without replacement from *rng;
/// otherwise every coordinate is probed.
GradCheckReport grad_check(const std::function<Tensor(const std::vector<Tensor>&)>& f,
                           std::vector<Tensor> inputs, double step = 1e-5,
                           Eigen::Index max_coords = -1, std::mt19937_64* rng = nullptr);

}  // namespace coevo
