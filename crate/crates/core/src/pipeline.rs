//! Per-pose geometry caches and the rendering paths that tie the physical
//! and neural branches to camera images.

use std::rc::Rc;
use std::time::Instant;

use crate::geometry::{
    rasterize, refined_normals, skin, unwrap, Bvh, Camera, GeometryError, HandRig, Pose, RasterLookup, RefineNormals,
    UvGeometryMaps,
};
use crate::linearnet::{compose_texture, Bound, GeometryOut, LinearNet, LinearOut, NetError};
use crate::math::V3;
use crate::scalar::Scalar;
use crate::shading::{compose_pbr, env_to_lights, shade_features, EnvironmentMap, LightSet, ShadingContext, Visibility};
use crate::tensor::{Graph, Tensor, TensorError, Var};

/// Everything derived from a posed mesh that does not depend on lights,
/// cameras or network outputs.
pub struct PoseGeometry {
    pub pose: Pose,
    pub posed: Vec<V3>,
    pub maps: UvGeometryMaps,
    pub bvh: Bvh,
    pub refine: Rc<RefineNormals>,
}

impl PoseGeometry {
    pub fn new(rig: &HandRig, pose: &Pose, res: usize) -> Result<Self, GeometryError> {
        let posed = skin(rig, pose)?;
        let maps = unwrap(rig, &posed, res);
        let bvh = Bvh::new(&posed, &rig.faces);
        let refine = Rc::new(RefineNormals::new(&maps));
        Ok(Self {
            pose: pose.clone(),
            posed,
            maps,
            bvh,
            refine,
        })
    }

    pub fn res(&self) -> usize {
        self.maps.res
    }

    pub fn visibility(&self, lights: &LightSet) -> Visibility {
        Visibility::compute(&self.maps, &self.bvh, lights)
    }

    pub fn raster(&self, rig: &HandRig, camera: &Camera) -> RasterLookup {
        RasterLookup::build(rig, &self.posed, &self.maps, camera)
    }

    pub fn context(&self, camera: &Camera, lights: LightSet, visibility: Visibility) -> ShadingContext {
        ShadingContext::new(&self.maps, Some(camera.center()), lights, visibility)
    }
}

/// Shading context and raster lookup of one (pose, camera, light set).
pub struct FrameScene {
    pub ctx: Rc<ShadingContext>,
    pub raster: Rc<RasterLookup>,
}

impl FrameScene {
    pub fn new(geo: &PoseGeometry, rig: &HandRig, camera: &Camera, lights: LightSet, visibility: Visibility) -> Self {
        Self {
            ctx: Rc::new(geo.context(camera, lights, visibility)),
            raster: Rc::new(geo.raster(rig, camera)),
        }
    }

    /// Same camera and geometry, different lights.
    pub fn with_lights(&self, geo: &PoseGeometry, camera: &Camera, lights: LightSet, visibility: Visibility) -> Self {
        Self {
            ctx: Rc::new(geo.context(camera, lights, visibility)),
            raster: Rc::clone(&self.raster),
        }
    }
}

/// Both branches of one frame on a graph.
pub struct FrameOutputs<'g, S: Scalar> {
    pub geometry: GeometryOut<'g, S>,
    /// Displacement in mm.
    pub displacement: Var<'g, S>,
    /// `[6, R, R]`, differentiable w.r.t. the geometry network.
    pub features: Var<'g, S>,
    pub physical_texture: Var<'g, S>,
    pub physical_image: Var<'g, S>,
    /// Conditioning features of the mean texture and pose.
    pub conditioning: Vec<Var<'g, S>>,
    pub linear: LinearOut<'g, S>,
    pub neural_texture: Var<'g, S>,
    pub neural_image: Var<'g, S>,
}

/// Physical branch `C^d ⊙ T + C^s` with refined normals from the geometry
/// network, and the neural branch `g ⊙ T + b σ_T` whose lighting input is
/// cut from the geometry network's gradient.
pub fn forward_frame<'g, S: Scalar>(
    net: &LinearNet<S>,
    params: &Bound<'g, S>,
    geo: &PoseGeometry,
    scene: &FrameScene,
    texture: Var<'g, S>,
    pose: &[f32],
) -> Result<FrameOutputs<'g, S>, NetError> {
    let graph = texture.graph();
    let pose = net.pose_input(graph, pose)?;
    let geometry = net.geometry_forward(params, texture, pose)?;
    let displacement = geometry.raw_displacement.displacement();
    let normals = refined_normals(&geo.refine, displacement)?;
    let features = shade_features(&scene.ctx, normals, geometry.roughness)?;
    let physical_texture = compose_pbr(features, texture)?;
    let physical_image = rasterize(&scene.raster, physical_texture)?;
    let nl = net.nonlinear_forward(params, texture, pose)?;
    let input = net.lighting_input(features.detach(), &scene.ctx.lights);
    let linear = net.linear_forward(params, input, &nl)?;
    let neural_texture = compose_texture(linear.gain, linear.bias, texture, net.config.sigma_t)?;
    let neural_image = rasterize(&scene.raster, neural_texture)?;
    Ok(FrameOutputs {
        geometry,
        displacement,
        features,
        physical_texture,
        physical_image,
        conditioning: nl,
        linear,
        neural_texture,
        neural_image,
    })
}

/// Physical render with given displacement (mm), roughness and albedo maps.
pub fn physical_render<'g, S: Scalar>(
    geo: &PoseGeometry,
    scene: &FrameScene,
    displacement: Var<'g, S>,
    roughness: Var<'g, S>,
    albedo: Var<'g, S>,
) -> Result<(Var<'g, S>, Var<'g, S>), TensorError> {
    let normals = refined_normals(&geo.refine, displacement)?;
    let features = shade_features(&scene.ctx, normals, roughness)?;
    let image = rasterize(&scene.raster, compose_pbr(features, albedo)?)?;
    Ok((features, image))
}

/// Milliseconds spent in each stage of [`Relighter::render_timed`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimes {
    pub visibility_ms: f64,
    pub features_ms: f64,
    pub network_ms: f64,
    pub raster_ms: f64,
}

/// Inference for one (identity, pose, camera): the light-independent parts
/// (geometry network, conditioning features) are evaluated once, after
/// which any light set renders through the lighting branch alone.
pub struct Relighter<'a, S: Scalar> {
    net: &'a LinearNet<S>,
    geo: &'a PoseGeometry,
    camera: Camera,
    raster: RasterLookup,
    texture: Tensor<S>,
    normals: Vec<V3>,
    roughness: Vec<f64>,
    conditioning: Vec<Tensor<S>>,
}

impl<'a, S: Scalar> Relighter<'a, S> {
    pub fn new(
        net: &'a LinearNet<S>,
        rig: &HandRig,
        geo: &'a PoseGeometry,
        camera: &Camera,
        texture: &Tensor<S>,
        pose: &[f32],
    ) -> Result<Self, NetError> {
        let g = Graph::new();
        let p = net.bind(&g, false);
        let tex = g.constant(texture.clone());
        let pose_v = net.pose_input(&g, pose)?;
        let geometry = net.geometry_forward(&p, tex, pose_v)?;
        let displacement = geometry.raw_displacement.displacement();
        let normals = refined_normals(&geo.refine, displacement)?.value();
        let n = geo.maps.len();
        let d = normals.data();
        let normals = (0..n)
            .map(|t| V3::new(to_f64(d[t]), to_f64(d[n + t]), to_f64(d[2 * n + t])))
            .collect();
        let roughness = geometry.roughness.value().data().iter().map(|&v| to_f64(v)).collect();
        let conditioning = net
            .nonlinear_forward(&p, tex, pose_v)?
            .iter()
            .map(|v| (*v.value()).clone())
            .collect();
        Ok(Self {
            net,
            geo,
            camera: camera.clone(),
            raster: geo.raster(rig, camera),
            texture: texture.clone(),
            normals,
            roughness,
            conditioning,
        })
    }

    pub fn raster(&self) -> &RasterLookup {
        &self.raster
    }

    pub fn visibility(&self, lights: &LightSet) -> Visibility {
        self.geo.visibility(lights)
    }

    /// `[6, R, R]` shading features.
    pub fn features(&self, lights: &LightSet, visibility: Visibility) -> Tensor<S> {
        let ctx = self.geo.context(&self.camera, lights.clone(), visibility);
        ctx.features(&self.normals, &self.roughness).to_tensor()
    }

    /// Neural texture from precomputed features.
    pub fn texture_from_features(&self, features: Tensor<S>, lights: &LightSet) -> Result<Tensor<S>, NetError> {
        let g = Graph::new();
        let p = self.net.bind(&g, false);
        let nl: Vec<_> = self.conditioning.iter().map(|t| g.constant(t.clone())).collect();
        let input = self.net.lighting_input(g.constant(features), lights);
        let out = self.net.linear_forward(&p, input, &nl)?;
        let tex = compose_texture(out.gain, out.bias, g.constant(self.texture.clone()), self.net.config.sigma_t)?;
        Ok((*tex.value()).clone())
    }

    /// Neural render `[3, H, W]` with per-stage timings.
    pub fn render_timed(&self, lights: &LightSet, visibility: Option<Visibility>) -> Result<(Tensor<S>, StageTimes), NetError> {
        let mut times = StageTimes::default();
        let t0 = Instant::now();
        let vis = match visibility {
            Some(v) => v,
            None => self.visibility(lights),
        };
        times.visibility_ms = ms(t0);
        let t1 = Instant::now();
        let features = self.features(lights, vis);
        times.features_ms = ms(t1);
        let t2 = Instant::now();
        let tex = self.texture_from_features(features, lights)?;
        times.network_ms = ms(t2);
        let t3 = Instant::now();
        let image = self.raster.render(&tex)?;
        times.raster_ms = ms(t3);
        Ok((image, times))
    }

    pub fn render(&self, lights: &LightSet, visibility: Option<Visibility>) -> Result<Tensor<S>, NetError> {
        Ok(self.render_timed(lights, visibility)?.0)
    }

    /// Physical-branch render `C^d ⊙ T + C^s` with the predicted geometry.
    pub fn render_physical(&self, lights: &LightSet, visibility: Visibility) -> Result<Tensor<S>, NetError> {
        let f = self.features(lights, visibility);
        let d = f.channels(0, 3)?;
        let s = f.channels(3, 6)?;
        let tex = d.zip_map(&self.texture, |a, b| a * b).zip_map(&s, |a, b| a + b);
        Ok(self.raster.render(&tex)?)
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn to_f64<S: Scalar>(v: S) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Relighting under an environment map reduced to `n` directional lights.
pub fn relight_env<S: Scalar>(relighter: &Relighter<'_, S>, env: &EnvironmentMap, n: usize) -> Result<Tensor<S>, NetError> {
    let lights = env_to_lights(env, n);
    relighter.render(&lights, None)
}

/// The same image assembled as the sum of one render per light, each
/// through the full network. Equal to [`relight_env`] when the lighting
/// branch is linear.
pub fn relight_env_by_sum<S: Scalar>(relighter: &Relighter<'_, S>, env: &EnvironmentMap, n: usize) -> Result<Tensor<S>, NetError> {
    let lights = env_to_lights(env, n);
    let vis = relighter.visibility(&lights);
    let mut total: Option<Tensor<S>> = None;
    for i in 0..lights.len() {
        let single = LightSet::new(vec![lights.lights[i]]);
        let img = relighter.render(&single, Some(vis.select(&[i])))?;
        match &mut total {
            Some(t) => t.add_assign(&img),
            None => total = Some(img),
        }
    }
    total.ok_or_else(|| NetError::Config("environment reduced to zero lights".into()))
}
