"""Reverse-mode automatic differentiation over scalar operations.

The tape records every intermediate value in creation order, which is
already a topological order, so the backward pass is a single reverse
sweep with no graph traversal. The op set is deliberately small:
add, sub, mul, div, neg, tanh, log, abs and binary max, with Python
floats folded into the closures instead of allocating constant nodes.

Subgradient conventions at non-smooth points:
  * d|x|/dx at x = 0 is 0
  * max(a, b) with a == b routes the gradient to the first argument
"""

import math


class Var:
    """One scalar node on a :class:`Tape`."""

    __slots__ = ("value", "grad", "_backward", "_tape")

    def __init__(self, value, tape):
        self.value = value
        self.grad = 0.0
        self._backward = None
        self._tape = tape

    def __repr__(self):
        return f"Var({self.value!r})"

    def _new(self, value):
        out = Var(value, self._tape)
        self._tape._nodes.append(out)
        return out

    def __add__(self, other):
        if isinstance(other, Var):
            out = self._new(self.value + other.value)

            def back(a=self, b=other, o=out):
                a.grad += o.grad
                b.grad += o.grad

        else:
            out = self._new(self.value + other)

            def back(a=self, o=out):
                a.grad += o.grad

        out._backward = back
        return out

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Var):
            out = self._new(self.value - other.value)

            def back(a=self, b=other, o=out):
                a.grad += o.grad
                b.grad -= o.grad

        else:
            out = self._new(self.value - other)

            def back(a=self, o=out):
                a.grad += o.grad

        out._backward = back
        return out

    def __rsub__(self, other):
        # other is a plain number here
        out = self._new(other - self.value)

        def back(a=self, o=out):
            a.grad -= o.grad

        out._backward = back
        return out

    def __mul__(self, other):
        if isinstance(other, Var):
            out = self._new(self.value * other.value)

            def back(a=self, b=other, o=out):
                a.grad += o.grad * b.value
                b.grad += o.grad * a.value

        else:
            out = self._new(self.value * other)

            def back(a=self, o=out, k=other):
                a.grad += o.grad * k

        out._backward = back
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            out = self._new(self.value / other.value)

            def back(a=self, b=other, o=out):
                a.grad += o.grad / b.value
                b.grad -= o.grad * o.value / b.value

        else:
            out = self._new(self.value / other)

            def back(a=self, o=out, k=other):
                a.grad += o.grad / k

        out._backward = back
        return out

    def __rtruediv__(self, other):
        out = self._new(other / self.value)

        def back(a=self, o=out):
            a.grad -= o.grad * o.value / a.value

        out._backward = back
        return out

    def __neg__(self):
        out = self._new(-self.value)

        def back(a=self, o=out):
            a.grad -= o.grad

        out._backward = back
        return out

    def tanh(self):
        out = self._new(math.tanh(self.value))

        def back(a=self, o=out):
            a.grad += o.grad * (1.0 - o.value * o.value)

        out._backward = back
        return out

    def log(self):
        out = self._new(math.log(self.value))

        def back(a=self, o=out):
            a.grad += o.grad / a.value

        out._backward = back
        return out

    def __abs__(self):
        v = self.value
        out = self._new(abs(v))
        sign = 1.0 if v > 0.0 else (-1.0 if v < 0.0 else 0.0)

        def back(a=self, o=out, s=sign):
            a.grad += o.grad * s

        out._backward = back
        return out


def maximum(a, b):
    """max(a, b) with ties routed to the first argument.

    Either argument may be a plain number; a constant that wins the max
    produces a node with no gradient flow.
    """
    if isinstance(a, Var):
        if isinstance(b, Var):
            if a.value >= b.value:
                out = a._new(a.value)

                def back(x=a, o=out):
                    x.grad += o.grad

            else:
                out = a._new(b.value)

                def back(x=b, o=out):
                    x.grad += o.grad

        else:
            if a.value >= b:
                out = a._new(a.value)

                def back(x=a, o=out):
                    x.grad += o.grad

            else:
                out = a._new(b)
                back = None
        out._backward = back
        return out
    if not isinstance(b, Var):
        raise TypeError("maximum() needs at least one Var argument")
    if a >= b.value:
        out = b._new(a)
        out._backward = None
    else:
        out = b._new(b.value)

        def back(x=b, o=out):
            x.grad += o.grad

        out._backward = back
    return out


class Tape:
    """Records scalar operations for reverse-mode differentiation.

    A tape is cheap to build and meant to be discarded after use; create
    one per evaluation. Multiple backward passes over the same tape are
    allowed (gradients are zeroed at the start of each pass), which is
    how per-task gradients of a shared expression are extracted.
    """

    def __init__(self):
        self._nodes = []

    def var(self, value):
        """Create a leaf variable holding ``value``."""
        node = Var(float(value), self)
        self._nodes.append(node)
        return node

    def backward(self, root):
        """Accumulate d(root)/d(node) into ``node.grad`` for every node."""
        nodes = self._nodes
        for node in nodes:
            node.grad = 0.0
        root.grad = 1.0
        for node in reversed(nodes):
            back = node._backward
            if back is not None:
                back()

    def gradient(self, root, wrt):
        """Return [d(root)/d(w) for w in wrt] as a list of floats."""
        self.backward(root)
        return [w.grad for w in wrt]
