use super::conv::{self, ConvGeom};
use super::graph::{Backward, Var};
use super::{Result, Tensor, TensorError};
use crate::scalar::Scalar;

/// Backward rule backed by a closure.
pub(crate) struct FnRule<F> {
    name: &'static str,
    f: F,
}

impl<S, F> Backward<S> for FnRule<F>
where
    S: Scalar,
    F: Fn(&[&Tensor<S>], &Tensor<S>, &Tensor<S>, &[bool]) -> Vec<Option<Tensor<S>>>,
{
    fn name(&self) -> &'static str {
        self.name
    }

    fn backward(
        &self,
        inputs: &[&Tensor<S>],
        output: &Tensor<S>,
        grad: &Tensor<S>,
        needs: &[bool],
    ) -> Vec<Option<Tensor<S>>> {
        (self.f)(inputs, output, grad, needs)
    }
}

pub(crate) fn rule<S, F>(name: &'static str, f: F) -> FnRule<F>
where
    S: Scalar,
    F: Fn(&[&Tensor<S>], &Tensor<S>, &Tensor<S>, &[bool]) -> Vec<Option<Tensor<S>>>,
{
    FnRule { name, f }
}

/// How the right operand of a binary op is aligned with the left one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Bcast {
    Same,
    /// one side is `[1, H, W]` against `[C, H, W]`
    ChannelLeft,
    ChannelRight,
    /// one side has a single element
    ScalarLeft,
    ScalarRight,
}

fn bcast(op: &'static str, a: &[usize], b: &[usize]) -> Result<Bcast> {
    if a == b {
        return Ok(Bcast::Same);
    }
    if b.iter().product::<usize>() == 1 {
        return Ok(Bcast::ScalarRight);
    }
    if a.iter().product::<usize>() == 1 {
        return Ok(Bcast::ScalarLeft);
    }
    if a.len() == 3 && b.len() == 3 && a[1..] == b[1..] {
        if b[0] == 1 {
            return Ok(Bcast::ChannelRight);
        }
        if a[0] == 1 {
            return Ok(Bcast::ChannelLeft);
        }
    }
    let dim = a
        .iter()
        .zip(b)
        .position(|(x, y)| x != y)
        .unwrap_or(a.len().min(b.len()));
    Err(TensorError::ShapeMismatch {
        op,
        dim: format!("dimension {dim} ({a:?} vs {b:?})"),
        expected: a.get(dim).copied().unwrap_or(0),
        got: b.get(dim).copied().unwrap_or(0),
    })
}

fn out_shape(kind: Bcast, a: &[usize], b: &[usize]) -> Vec<usize> {
    match kind {
        Bcast::Same | Bcast::ChannelRight | Bcast::ScalarRight => a.to_vec(),
        Bcast::ChannelLeft | Bcast::ScalarLeft => b.to_vec(),
    }
}

/// Applies `f` to broadcast-aligned element pairs.
fn zip_bcast<S: Scalar>(kind: Bcast, a: &Tensor<S>, b: &Tensor<S>, f: impl Fn(S, S) -> S) -> Tensor<S> {
    let shape = out_shape(kind, a.shape(), b.shape());
    let n: usize = shape.iter().product();
    let plane = if shape.len() == 3 { shape[1] * shape[2] } else { n };
    let ad = a.data();
    let bd = b.data();
    let data = (0..n)
        .map(|i| {
            let (x, y) = match kind {
                Bcast::Same => (ad[i], bd[i]),
                Bcast::ChannelRight => (ad[i], bd[i % plane]),
                Bcast::ChannelLeft => (ad[i % plane], bd[i]),
                Bcast::ScalarRight => (ad[i], bd[0]),
                Bcast::ScalarLeft => (ad[0], bd[i]),
            };
            f(x, y)
        })
        .collect();
    Tensor::from_vec(&shape, data).expect("broadcast shape")
}

/// Sums a full-size gradient back onto an operand that was broadcast.
fn reduce_to<S: Scalar>(grad: Tensor<S>, target: &[usize]) -> Tensor<S> {
    if grad.shape() == target {
        return grad;
    }
    let n_target: usize = target.iter().product();
    if n_target == 1 {
        return Tensor::from_vec(target, vec![grad.sum()]).expect("scalar shape");
    }
    let plane = n_target;
    let mut out = vec![S::zero(); plane];
    for chunk in grad.data().chunks(plane) {
        for (o, &g) in out.iter_mut().zip(chunk) {
            *o += g;
        }
    }
    Tensor::from_vec(target, out).expect("channel shape")
}

fn upsample2x<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let (c, h, w) = x.chw().expect("rank checked by caller");
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = vec![S::zero(); c * oh * ow];
    let taps = |o: usize, n: usize| -> [(usize, f64); 2] {
        // half-pixel centres: source coordinate o/2 - 1/4
        let i = o / 2;
        if o % 2 == 0 {
            [(i, 0.75), (i.saturating_sub(1), 0.25)]
        } else {
            [(i, 0.75), ((i + 1).min(n - 1), 0.25)]
        }
    };
    for ci in 0..c {
        let src = &x.data()[ci * h * w..(ci + 1) * h * w];
        let dst = &mut out[ci * oh * ow..(ci + 1) * oh * ow];
        for oy in 0..oh {
            let ty = taps(oy, h);
            for ox in 0..ow {
                let tx = taps(ox, w);
                let mut acc = S::zero();
                for &(iy, wy) in &ty {
                    for &(ix, wx) in &tx {
                        acc += S::lit(wy * wx) * src[iy * w + ix];
                    }
                }
                dst[oy * ow + ox] = acc;
            }
        }
    }
    Tensor::from_vec(&[c, oh, ow], out).expect("upsample shape")
}

fn upsample2x_adjoint<S: Scalar>(g: &Tensor<S>, h: usize, w: usize) -> Tensor<S> {
    let (c, oh, ow) = g.chw().expect("rank");
    let mut out = vec![S::zero(); c * h * w];
    let taps = |o: usize, n: usize| -> [(usize, f64); 2] {
        let i = o / 2;
        if o % 2 == 0 {
            [(i, 0.75), (i.saturating_sub(1), 0.25)]
        } else {
            [(i, 0.75), ((i + 1).min(n - 1), 0.25)]
        }
    };
    for ci in 0..c {
        let src = &g.data()[ci * oh * ow..(ci + 1) * oh * ow];
        let dst = &mut out[ci * h * w..(ci + 1) * h * w];
        for oy in 0..oh {
            let ty = taps(oy, h);
            for ox in 0..ow {
                let tx = taps(ox, w);
                let gv = src[oy * ow + ox];
                for &(iy, wy) in &ty {
                    for &(ix, wx) in &tx {
                        dst[iy * w + ix] += S::lit(wy * wx) * gv;
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[c, h, w], out).expect("adjoint shape")
}

fn avg_pool2x<S: Scalar>(x: &Tensor<S>) -> Tensor<S> {
    let (c, h, w) = x.chw().expect("rank");
    let (oh, ow) = (h / 2, w / 2);
    let quarter = S::lit(0.25);
    let mut out = vec![S::zero(); c * oh * ow];
    for ci in 0..c {
        let src = &x.data()[ci * h * w..];
        for oy in 0..oh {
            for ox in 0..ow {
                let i = 2 * oy * w + 2 * ox;
                out[(ci * oh + oy) * ow + ox] = quarter * (src[i] + src[i + 1] + src[i + w] + src[i + w + 1]);
            }
        }
    }
    Tensor::from_vec(&[c, oh, ow], out).expect("pool shape")
}

fn avg_pool2x_adjoint<S: Scalar>(g: &Tensor<S>, h: usize, w: usize) -> Tensor<S> {
    let (c, oh, ow) = g.chw().expect("rank");
    let quarter = S::lit(0.25);
    let mut out = vec![S::zero(); c * h * w];
    for ci in 0..c {
        for oy in 0..oh {
            for ox in 0..ow {
                let gv = quarter * g.data()[(ci * oh + oy) * ow + ox];
                let i = ci * h * w + 2 * oy * w + 2 * ox;
                out[i] += gv;
                out[i + 1] += gv;
                out[i + w] += gv;
                out[i + w + 1] += gv;
            }
        }
    }
    Tensor::from_vec(&[c, h, w], out).expect("pool adjoint shape")
}

fn rank3<S: Scalar>(op: &'static str, v: &Tensor<S>) -> Result<(usize, usize, usize)> {
    v.chw().map_err(|_| TensorError::Rank {
        op,
        expected: 3,
        shape: v.shape().to_vec(),
    })
}

impl<'g, S: Scalar> Var<'g, S> {
    pub(crate) fn unary(
        &self,
        name: &'static str,
        f: impl Fn(S) -> S,
        df: impl Fn(S, S) -> S + 'static, // (input, output) -> local derivative
    ) -> Var<'g, S> {
        let x = self.value();
        let out = x.map(&f);
        self.graph.record(
            &[*self],
            out,
            rule(name, move |inp: &[&Tensor<S>], out: &Tensor<S>, g: &Tensor<S>, _: &[bool]| {
                let data = inp[0]
                    .data()
                    .iter()
                    .zip(out.data())
                    .zip(g.data())
                    .map(|((&x, &y), &gv)| gv * df(x, y))
                    .collect();
                vec![Some(Tensor::from_vec(inp[0].shape(), data).expect("same shape"))]
            }),
        )
    }

    pub fn add(&self, other: Var<'g, S>) -> Result<Var<'g, S>> {
        let (a, b) = (self.value(), other.value());
        let kind = bcast("add", a.shape(), b.shape())?;
        let out = zip_bcast(kind, &a, &b, |x, y| x + y);
        Ok(self.graph.record(
            &[*self, other],
            out,
            rule("add", move |inp: &[&Tensor<S>], _: &Tensor<S>, g: &Tensor<S>, needs: &[bool]| {
                vec![
                    needs[0].then(|| reduce_to(g.clone(), inp[0].shape())),
                    needs[1].then(|| reduce_to(g.clone(), inp[1].shape())),
                ]
            }),
        ))
    }

    pub fn sub(&self, other: Var<'g, S>) -> Result<Var<'g, S>> {
        let (a, b) = (self.value(), other.value());
        let kind = bcast("sub", a.shape(), b.shape())?;
        let out = zip_bcast(kind, &a, &b, |x, y| x - y);
        Ok(self.graph.record(
            &[*self, other],
            out,
            rule("sub", move |inp: &[&Tensor<S>], _: &Tensor<S>, g: &Tensor<S>, needs: &[bool]| {
                vec![
                    needs[0].then(|| reduce_to(g.clone(), inp[0].shape())),
                    needs[1].then(|| reduce_to(g.map(|v| -v), inp[1].shape())),
                ]
            }),
        ))
    }

    /// Element-wise product with the same broadcasting rules as [`Var::add`].
    pub fn mul(&self, other: Var<'g, S>) -> Result<Var<'g, S>> {
        let (a, b) = (self.value(), other.value());
        let kind = bcast("mul", a.shape(), b.shape())?;
        let out = zip_bcast(kind, &a, &b, |x, y| x * y);
        Ok(self.graph.record(
            &[*self, other],
            out,
            rule("mul", move |inp: &[&Tensor<S>], _: &Tensor<S>, g: &Tensor<S>, needs: &[bool]| {
                let (a, b) = (inp[0], inp[1]);
                let da = needs[0].then(|| {
                    let k = match kind {
                        Bcast::ChannelRight | Bcast::ScalarRight => kind,
                        _ => Bcast::Same,
                    };
                    let full = zip_bcast(k, g, b, |gv, bv| gv * bv);
                    reduce_to(full, a.shape())
                });
                let db = needs[1].then(|| {
                    // swap roles: grad * a, aligned to b
                    let full = match kind {
                        Bcast::Same => g.zip_map(a, |gv, av| gv * av),
                        Bcast::ChannelRight | Bcast::ScalarRight => g.zip_map(a, |gv, av| gv * av),
                        Bcast::ChannelLeft => zip_bcast(Bcast::ChannelRight, g, a, |gv, av| gv * av),
                        Bcast::ScalarLeft => g.map(|gv| gv * a.data()[0]),
                    };
                    reduce_to(full, b.shape())
                });
                vec![da, db]
            }),
        ))
    }

    pub fn scale(&self, s: S) -> Var<'g, S> {
        self.unary("scale", move |x| x * s, move |_, _| s)
    }

    pub fn add_scalar(&self, c: S) -> Var<'g, S> {
        self.unary("add_scalar", move |x| x + c, |_, _| S::one())
    }

    pub fn neg(&self) -> Var<'g, S> {
        self.scale(-S::one())
    }

    pub fn leaky_relu(&self, slope: S) -> Var<'g, S> {
        assert!(slope >= S::zero() && slope < S::one(), "leaky_relu slope must lie in [0, 1)");
        self.unary(
            "leaky_relu",
            move |x| if x >= S::zero() { x } else { slope * x },
            move |x, _| if x >= S::zero() { S::one() } else { slope },
        )
    }

    pub fn relu(&self) -> Var<'g, S> {
        self.leaky_relu(S::zero())
    }

    pub fn sigmoid(&self) -> Var<'g, S> {
        self.unary(
            "sigmoid",
            |x| S::one() / (S::one() + (-x).exp()),
            |_, y| y * (S::one() - y),
        )
    }

    pub fn abs(&self) -> Var<'g, S> {
        self.unary("abs", |x| x.abs(), |x, _| x.signum() * if x == S::zero() { S::zero() } else { S::one() })
    }

    pub fn sqrt(&self) -> Var<'g, S> {
        self.unary(
            "sqrt",
            |x| x.sqrt(),
            |_, y| if y > S::zero() { S::lit(0.5) / y } else { S::zero() },
        )
    }

    pub fn square(&self) -> Var<'g, S> {
        self.unary("square", |x| x * x, |x, _| S::lit(2.0) * x)
    }

    pub fn sum(&self) -> Var<'g, S> {
        let x = self.value();
        let out = Tensor::scalar(x.sum());
        self.graph.record(
            &[*self],
            out,
            rule("sum", |inp: &[&Tensor<S>], _: &Tensor<S>, g: &Tensor<S>, _: &[bool]| {
                vec![Some(Tensor::full(inp[0].shape(), g.data()[0]))]
            }),
        )
    }

    pub fn mean(&self) -> Var<'g, S> {
        let n = S::from_usize(self.value().len()).expect("count");
        self.sum().scale(S::one() / n)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'g, S>> {
        let x = (*self.value()).clone().reshape(shape)?;
        Ok(self.graph.record(
            &[*self],
            x,
            rule("reshape", |inp: &[&Tensor<S>], _: &Tensor<S>, g: &Tensor<S>, _: &[bool]| {
                vec![Some(g.clone().reshape(inp[0].shape()).expect("same count"))]
            }),
        ))
    }

    /// Cross-correlation of a `[C_in, H, W]` map with a `[C_out, C_in, k, k]` kernel.
    pub fn conv2d(&self, kernel: Var<'g, S>, bias: Option<Var<'g, S>>, stride: usize, pad: usize) -> Result<Var<'g, S>> {
        let (x, k) = (self.value(), kernel.value());
        let b = bias.map(|b| b.value());
        let (out, geom) = conv::conv2d_forward(&x, &k, b.as_deref(), stride, pad)?;
        let mut inputs = vec![*self, kernel];
        inputs.extend(bias);
        Ok(self.graph.record(&inputs, out, conv_rule(geom, false)))
    }

    /// Adjoint of [`Var::conv2d`] for the same kernel, stride and padding.
    /// The kernel is `[C_in, C_out, k, k]` from this op's point of view.
    pub fn conv_transpose2d(
        &self,
        kernel: Var<'g, S>,
        bias: Option<Var<'g, S>>,
        stride: usize,
        pad: usize,
        out_size: Option<(usize, usize)>,
    ) -> Result<Var<'g, S>> {
        let (y, k) = (self.value(), kernel.value());
        let b = bias.map(|b| b.value());
        let (out, geom) = conv::conv_transpose2d_forward(&y, &k, b.as_deref(), stride, pad, out_size)?;
        let mut inputs = vec![*self, kernel];
        inputs.extend(bias);
        Ok(self.graph.record(&inputs, out, conv_rule(geom, true)))
    }

    /// Bilinear 2x upsampling with half-pixel centres and clamped borders.
    pub fn upsample_bilinear2x(&self) -> Result<Var<'g, S>> {
        let x = self.value();
        let (_, h, w) = rank3("upsample_bilinear2x", &x)?;
        let out = upsample2x(&x);
        Ok(self.graph.record(
            &[*self],
            out,
            rule("upsample_bilinear2x", move |_: &[&Tensor<S>], _: &Tensor<S>, g: &Tensor<S>, _: &[bool]| {
                vec![Some(upsample2x_adjoint(g, h, w))]
            }),
        ))
    }

    /// 2x2 mean pooling; odd trailing rows/columns are dropped.
    pub fn avg_pool2x(&self) -> Result<Var<'g, S>> {
        let x = self.value();
        let (_, h, w) = rank3("avg_pool2x", &x)?;
        if h < 2 || w < 2 {
            return Err(TensorError::Invalid {
                op: "avg_pool2x",
                msg: format!("{h}x{w} map is too small"),
            });
        }
        let out = avg_pool2x(&x);
        Ok(self.graph.record(
            &[*self],
            out,
            rule("avg_pool2x", move |_: &[&Tensor<S>], _: &Tensor<S>, g: &Tensor<S>, _: &[bool]| {
                vec![Some(avg_pool2x_adjoint(g, h, w))]
            }),
        ))
    }

    /// Channels `[start, end)` of a `[C, H, W]` map.
    pub fn slice_channels(&self, start: usize, end: usize) -> Result<Var<'g, S>> {
        let x = self.value();
        let out = x.channels(start, end)?;
        Ok(self.graph.record(
            &[*self],
            out,
            rule("slice_channels", move |inp: &[&Tensor<S>], _: &Tensor<S>, g: &Tensor<S>, _: &[bool]| {
                let mut full = Tensor::zeros(inp[0].shape());
                let plane = g.len() / (end - start);
                full.data_mut()[start * plane..end * plane].copy_from_slice(g.data());
                vec![Some(full)]
            }),
        ))
    }

    /// Broadcasts a `[C, 1, 1]` (or `[C]`) tensor to `[C, h, w]`.
    pub fn expand_spatial(&self, h: usize, w: usize) -> Result<Var<'g, S>> {
        let x = self.value();
        let c = x.len();
        if !(x.shape() == [c] || x.shape() == [c, 1, 1]) {
            return Err(TensorError::Invalid {
                op: "expand_spatial",
                msg: format!("expected [C] or [C,1,1], got {:?}", x.shape()),
            });
        }
        let data = x.data().iter().flat_map(|&v| std::iter::repeat(v).take(h * w)).collect();
        let out = Tensor::from_vec(&[c, h, w], data)?;
        Ok(self.graph.record(
            &[*self],
            out,
            rule("expand_spatial", move |inp: &[&Tensor<S>], _: &Tensor<S>, g: &Tensor<S>, _: &[bool]| {
                let sums = g.data().chunks(h * w).map(|ch| ch.iter().copied().sum()).collect();
                vec![Some(Tensor::from_vec(inp[0].shape(), sums).expect("shape"))]
            }),
        ))
    }
}

/// Concatenates `[C_i, H, W]` maps along channels.
pub fn concat_channels<'g, S: Scalar>(parts: &[Var<'g, S>]) -> Result<Var<'g, S>> {
    let first = parts.first().ok_or(TensorError::Invalid {
        op: "concat_channels",
        msg: "no inputs".into(),
    })?;
    let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
    let (_, h, w) = rank3("concat_channels", &values[0])?;
    let mut channels = Vec::with_capacity(parts.len());
    let mut data = Vec::new();
    for v in &values {
        let (c, vh, vw) = rank3("concat_channels", v)?;
        if vh != h {
            return Err(TensorError::ShapeMismatch {
                op: "concat_channels",
                dim: "height".into(),
                expected: h,
                got: vh,
            });
        }
        if vw != w {
            return Err(TensorError::ShapeMismatch {
                op: "concat_channels",
                dim: "width".into(),
                expected: w,
                got: vw,
            });
        }
        channels.push(c);
        data.extend_from_slice(v.data());
    }
    let total: usize = channels.iter().sum();
    let out = Tensor::from_vec(&[total, h, w], data)?;
    Ok(first.graph.record(
        parts,
        out,
        rule("concat_channels", move |_: &[&Tensor<S>], _: &Tensor<S>, g: &Tensor<S>, needs: &[bool]| {
            let mut offset = 0;
            channels
                .iter()
                .zip(needs)
                .map(|(&c, &need)| {
                    let part = need.then(|| g.channels(offset, offset + c).expect("in range"));
                    offset += c;
                    part
                })
                .collect()
        }),
    ))
}

fn conv_rule<S: Scalar>(geom: ConvGeom, transposed: bool) -> impl Backward<S> {
    rule(
        if transposed { "conv_transpose2d" } else { "conv2d" },
        move |inp: &[&Tensor<S>], _: &Tensor<S>, g: &Tensor<S>, needs: &[bool]| {
            let (dx, dk) = if transposed {
                conv::conv_transpose2d_backward(inp[0], inp[1], g, &geom, needs[0], needs[1])
            } else {
                conv::conv2d_backward(inp[0], inp[1], g, &geom, needs[0], needs[1])
            };
            let mut out = vec![dx, dk];
            if inp.len() == 3 {
                out.push(needs[2].then(|| conv::channel_sums(g)));
            }
            out
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Graph;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn conv_scalar_multiplication() {
        let g = Graph::<f64>::new();
        let x = g.constant(t(&[1, 1, 1], &[1.0]));
        let k = g.constant(t(&[1, 1, 1, 1], &[2.0]));
        assert_eq!(x.conv2d(k, None, 1, 0).unwrap().value().data(), &[2.0]);
    }

    #[test]
    fn conv_hand_computed_dot_product() {
        let g = Graph::<f64>::new();
        let x = g.constant(t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let k = g.constant(t(&[1, 1, 2, 2], &[1.0, 0.0, 0.0, 1.0]));
        let y = x.conv2d(k, None, 1, 0).unwrap();
        assert_eq!(y.shape(), vec![1, 1, 1]);
        assert_eq!(y.value().data(), &[5.0]);
    }

    #[test]
    fn conv_zero_kernel_annihilates() {
        let g = Graph::<f32>::new();
        let x = g.constant(Tensor::from_vec(&[2, 4, 4], (0..32).map(|v| v as f32).collect()).unwrap());
        let k = g.constant(Tensor::zeros(&[3, 2, 3, 3]));
        let y = x.conv2d(k, None, 1, 1).unwrap();
        assert!(y.value().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conv_transpose_unit_kernel_scales() {
        let g = Graph::<f64>::new();
        let y = g.constant(t(&[1, 2, 2], &[1.0, -2.0, 3.0, 0.5]));
        let k = g.constant(t(&[1, 1, 1, 1], &[3.0]));
        let z = y.conv_transpose2d(k, None, 1, 0, None).unwrap();
        assert_eq!(z.value().data(), &[3.0, -6.0, 9.0, 1.5]);
        let zero = g.constant(Tensor::zeros(&[1, 2, 2]));
        let zz = zero.conv_transpose2d(k, None, 1, 0, None).unwrap();
        assert!(zz.value().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn leaky_relu_definition() {
        let g = Graph::<f64>::new();
        let x = g.constant(t(&[2], &[1.0, -1.0]));
        assert_eq!(x.leaky_relu(0.2).value().data(), &[1.0, -0.2]);
        let y = g.constant(t(&[1], &[-3.0]));
        assert_eq!(y.leaky_relu(0.0).value().data(), &[0.0]);
        let pos = g.constant(t(&[3], &[0.0, 2.0, 5.0]));
        assert_eq!(pos.leaky_relu(0.2).value().data(), &[0.0, 2.0, 5.0]);
    }

    #[test]
    fn elementwise_definitions() {
        let g = Graph::<f64>::new();
        let x = g.constant(t(&[3], &[1.0, -2.0, 0.5]));
        let ones = g.constant(Tensor::ones(&[3]));
        assert_eq!(x.mul(ones).unwrap().value().data(), x.value().data());
        let z = g.constant(t(&[1], &[0.0]));
        assert_eq!(z.sigmoid().value().data(), &[0.5]);
        let c = g.constant(Tensor::full(&[2, 3, 4], 0.7));
        let up = c.upsample_bilinear2x().unwrap();
        assert_eq!(up.shape(), vec![2, 6, 8]);
        assert!(up.value().data().iter().all(|&v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn channel_broadcast_add_and_mul() {
        let g = Graph::<f64>::new();
        let a = g.param(Tensor::from_vec(&[2, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let b = g.param(Tensor::from_vec(&[1, 1, 2], vec![10.0, 20.0]).unwrap());
        let s = a.mul(b).unwrap();
        assert_eq!(s.value().data(), &[10.0, 40.0, 30.0, 80.0]);
        let grads = g.backward(s.sum()).unwrap();
        assert_eq!(grads.get(a).unwrap().data(), &[10.0, 20.0, 10.0, 20.0]);
        assert_eq!(grads.get(b).unwrap().data(), &[4.0, 6.0]);
        assert!(a.add(g.constant(Tensor::zeros(&[3, 1, 2]))).is_err());
    }

    #[test]
    fn sum_and_quadratic_gradients() {
        let g = Graph::<f64>::new();
        let x = g.param(t(&[3], &[1.0, -2.0, 4.0]));
        let grads = g.backward(x.sum()).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[1.0, 1.0, 1.0]);
        let g2 = Graph::<f64>::new();
        let x = g2.param(t(&[3], &[1.0, -2.0, 4.0]));
        let grads = g2.backward(x.mul(x).unwrap().sum()).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, -4.0, 8.0]);
    }

    #[test]
    fn concat_and_slice_roundtrip_gradient() {
        let g = Graph::<f64>::new();
        let a = g.param(Tensor::ones(&[1, 2, 2]));
        let b = g.param(Tensor::full(&[2, 2, 2], 2.0));
        let c = concat_channels(&[a, b]).unwrap();
        assert_eq!(c.shape(), vec![3, 2, 2]);
        let s = c.slice_channels(1, 2).unwrap().sum();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(a).unwrap().sum(), 0.0);
        assert_eq!(grads.get(b).unwrap().data(), &[1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    }
}
